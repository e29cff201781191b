#include "inpsim/stats.hpp"
#include "oracles.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace inpsim;
using namespace inpsim::stats;

using oracle::brute_force_cliff;
using oracle::brute_force_h;

TEST_CASE("percentile type 7")
{
    const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(percentile_sorted(v, 0.0) == 1.0);
    CHECK(percentile_sorted(v, 1.0) == 10.0);
    CHECK(percentile_sorted(v, 0.5) == 5.5);
    CHECK(percentile(std::vector<double>{3, 1, 2}, 0.25) == 1.5);
}

TEST_CASE("quintiles of 1..10")
{
    std::vector<double> v(10);
    std::iota(v.begin(), v.end(), 1.0);
    const auto q = assign_quintiles(v);
    CHECK(q.breakpoints[0] == doctest::Approx(2.8));
    CHECK(q.breakpoints[1] == doctest::Approx(4.6));
    CHECK(q.breakpoints[2] == doctest::Approx(6.4));
    CHECK(q.breakpoints[3] == doctest::Approx(8.2));
    CHECK(q.labels == std::vector<int>{1, 1, 2, 2, 3, 3, 4, 4, 5, 5});
    CHECK(q.populations() == std::array<std::size_t, 5>{2, 2, 2, 2, 2});
    CHECK_FALSE(q.degenerate);
    CHECK(assign_quintiles(std::vector<double>(7, 3.0)).degenerate);
}

TEST_CASE("mid-ranks")
{
    CHECK(mid_ranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("Kruskal-Wallis reference value")
{
    const auto r = kruskal_wallis({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
    CHECK(std::abs(r.h_statistic - 7.2) <= 1e-9);
    CHECK(std::abs(r.p_value - std::exp(-3.6)) <= 1e-9);
    CHECK(r.df == 2);
    CHECK(r.tie_correction == 1.0);
}

TEST_CASE("Kruskal-Wallis matches brute force on every partition with N <= 8")
{
    std::mt19937_64 gen(1);
    std::size_t checked = 0;
    for (std::size_t n = 3; n <= 8; ++n) {
        std::vector<double> values(n);
        for (std::size_t i = 0; i < n; ++i) values[i] = 0.37 * static_cast<double>(i * i) + 1.0;
        std::shuffle(values.begin(), values.end(), gen);
        for (std::size_t k = 2; k <= 3; ++k) {
            std::size_t combos = 1;
            for (std::size_t i = 0; i < n; ++i) combos *= k;
            for (std::size_t code = 0; code < combos; ++code) {
                std::vector<std::vector<double>> groups(k);
                std::size_t c = code;
                for (std::size_t i = 0; i < n; ++i, c /= k) groups[c % k].push_back(values[i]);
                if (std::any_of(groups.begin(), groups.end(), [](const auto& g) { return g.empty(); })) continue;
                CHECK(std::abs(kruskal_wallis(groups).h_statistic - brute_force_h(groups)) <= 1e-12);
                ++checked;
            }
        }
    }
    CHECK(checked > 4000);
}

TEST_CASE("Kruskal-Wallis with ties matches the tie-corrected brute force")
{
    const std::vector<std::vector<double>> g{{1, 1, 2, 3}, {2, 2, 4}, {3, 5, 5, 5}};
    const auto r = kruskal_wallis(g);
    CHECK(r.tie_correction < 1.0);
    CHECK(r.h_statistic == doctest::Approx(brute_force_h(g)).epsilon(1e-12));
}

TEST_CASE("Kruskal-Wallis edge cases")
{
    const auto flat = kruskal_wallis({{2, 2}, {2, 2, 2}});
    CHECK(flat.degenerate);
    CHECK(flat.h_statistic == 0.0);
    CHECK(flat.p_value == 1.0);
    CHECK_THROWS(kruskal_wallis({{1, 2, 3}}));
    CHECK_THROWS_AS(kruskal_wallis({{1, 2}, {}}), Error);
    CHECK_THROWS_AS(kruskal_wallis({{1}, {2}}), Error);
}

TEST_CASE("statistics are invariant to monotone transforms and group order")
{
    std::mt19937_64 gen(9);
    std::normal_distribution<double> norm(0.0, 1.0);
    std::vector<std::vector<double>> g(4);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (int j = 0; j < 9 + static_cast<int>(i); ++j) g[i].push_back(std::round(norm(gen) * 4 + static_cast<double>(i)) / 4);
    auto t = g;
    for (auto& grp : t)
        for (auto& v : grp) v = std::exp(v) * 3.0 + v * v * v;
    auto shuffled = g;
    for (auto& grp : shuffled) std::shuffle(grp.begin(), grp.end(), gen);

    const auto a = kruskal_wallis(g), b = kruskal_wallis(t), c = kruskal_wallis(shuffled);
    CHECK(a.h_statistic == doctest::Approx(b.h_statistic).epsilon(1e-12));
    CHECK(a.h_statistic == doctest::Approx(c.h_statistic).epsilon(1e-12));
    const auto da = dunn_posthoc(g), db = dunn_posthoc(t);
    REQUIRE(da.size() == 6);
    for (std::size_t i = 0; i < da.size(); ++i) CHECK(da[i].z == doctest::Approx(db[i].z).epsilon(1e-12));
}

TEST_CASE("Dunn: two groups give H = z^2")
{
    std::mt19937_64 gen(4);
    std::uniform_int_distribution<int> d(0, 20);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<double>> g(2);
        for (int i = 0; i < 7; ++i) g[0].push_back(d(gen));
        for (int i = 0; i < 11; ++i) g[1].push_back(d(gen) + 3);
        const auto kw = kruskal_wallis(g);
        if (kw.degenerate) continue;
        const auto dunn = dunn_posthoc(g);
        REQUIRE(dunn.size() == 1);
        CHECK(std::abs(kw.h_statistic - dunn[0].z * dunn[0].z) <= 1e-9);
    }
}

TEST_CASE("Dunn: identical groups and the Bonferroni cap")
{
    for (const auto& d : dunn_posthoc({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}})) {
        CHECK(d.z == 0.0);
        CHECK(d.p_adjusted == 1.0);
        CHECK_FALSE(d.significant);
    }
    // Many groups with middling differences: adjusted values would exceed 1 uncapped.
    std::vector<std::vector<double>> g;
    for (int k = 0; k < 8; ++k) g.push_back({k * 0.1, 1 + k * 0.1, 2 + k * 0.1, 3.05 - k * 0.1});
    const auto all = dunn_posthoc(g);
    CHECK(all.size() == 28);
    for (const auto& d : all) {
        CHECK(d.p_adjusted <= 1.0);
        CHECK(d.p_adjusted >= d.p_raw);
        CHECK(d.p_adjusted == std::min(1.0, 28 * d.p_raw));
    }
}

TEST_CASE("Cliff's delta matches exhaustive counting")
{
    std::mt19937_64 gen(12);
    std::uniform_int_distribution<int> size(1, 12), val(0, 9);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> a(static_cast<std::size_t>(size(gen))), b(static_cast<std::size_t>(size(gen)));
        for (auto& v : a) v = val(gen);
        for (auto& v : b) v = val(gen);
        const auto fast = cliffs_delta(a, b);
        const auto slow = brute_force_cliff(a, b);
        CHECK(fast.greater == slow.greater);
        CHECK(fast.less == slow.less);
        CHECK(fast.delta == slow.delta);
        CHECK(cliffs_delta(b, a).delta == -fast.delta);
        CHECK(cliffs_delta(a, a).delta == 0.0);
    }
}

TEST_CASE("Cliff's delta magnitude thresholds")
{
    CHECK(magnitude_of(0.147) == Magnitude::negligible);
    CHECK(magnitude_of(-0.1471) == Magnitude::small);
    CHECK(magnitude_of(0.33) == Magnitude::small);
    CHECK(magnitude_of(0.3301) == Magnitude::medium);
    CHECK(magnitude_of(0.474) == Magnitude::medium);
    CHECK(magnitude_of(0.4741) == Magnitude::large);

    // One value against 1000: delta is exactly (below - above) / 1000.
    const auto probe = [](int below) {
        std::vector<double> b(1000, 5.0);
        std::fill(b.begin(), b.begin() + below, 1.0);
        return cliffs_delta(std::vector<double>{5.0}, b).magnitude;
    };
    CHECK(probe(147) == Magnitude::negligible);
    CHECK(probe(148) == Magnitude::small);
    CHECK(probe(330) == Magnitude::small);
    CHECK(probe(331) == Magnitude::medium);
    CHECK(probe(474) == Magnitude::medium);
    CHECK(probe(475) == Magnitude::large);
}

TEST_CASE("regularized gamma Q agrees with Boost")
{
    for (double a : {0.5, 1.0, 1.5, 2.0, 4.5, 10.0, 37.0}) {
        for (double x : {1e-3, 0.1, 0.9, 1.0, 2.5, 7.2, 15.0, 60.0}) {
            const double expected = boost::math::gamma_q(a, x);
            CHECK(regularized_gamma_q(a, x) == doctest::Approx(expected).epsilon(1e-10).scale(1e-300));
        }
    }
    CHECK(chi2_upper_tail(7.2, 2) == doctest::Approx(std::exp(-3.6)).epsilon(1e-12));
    CHECK(chi2_upper_tail(0.0, 4) == 1.0);
}

TEST_CASE("normal two-sided p")
{
    CHECK(normal_two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(normal_two_sided_p(-1.959963984540054) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(normal_two_sided_p(0.0) == 1.0);
}

TEST_CASE("box summary uses 1.5 IQR whiskers")
{
    const auto b = box_summary({1, 2, 3, 4, 100});
    CHECK(b.median == 3.0);
    CHECK(b.q1 == 2.0);
    CHECK(b.q3 == 4.0);
    CHECK(b.whisker_low == 1.0);
    CHECK(b.whisker_high == 4.0);
    CHECK(b.outliers == std::vector<double>{100});
    CHECK(b.mean == 22.0);
}

TEST_CASE("build_report")
{
    std::mt19937_64 gen(5);
    std::normal_distribution<double> norm(15.0, 3.0);
    std::vector<double> feature(200), latency(200);
    for (std::size_t i = 0; i < feature.size(); ++i) {
        feature[i] = static_cast<double>(i % 50);
        latency[i] = norm(gen);
    }
    // Q5 of the feature gets 10 s more latency.
    const auto q = assign_quintiles(feature);
    for (std::size_t i = 0; i < latency.size(); ++i)
        if (q.labels[i] == 5) latency[i] += 10.0;
    const auto r = build_report(feature, latency, Feature::block_size_kb);
    CHECK(r.kw.p_value < 1e-6);
    REQUIRE(r.pairs.size() == 10);
    for (const auto& p : r.pairs) {
        if (p.dunn.j == 4) {
            CHECK(p.dunn.significant);
            CHECK(p.cliff.magnitude == Magnitude::large);
        }
    }

    CHECK_THROWS_AS(build_report(std::span(feature).first(24), std::span(latency).first(24), Feature::gas_price_gwei),
                    Error);
    const std::vector<double> flat(50, 1.0);
    try {
        build_report(flat, std::span(latency).first(50), Feature::block_tx_count);
        FAIL("expected DegenerateBinning");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::degenerate_binning);
    }
}

TEST_CASE("feature names round-trip")
{
    for (auto f : kAllFeatures) CHECK(feature_from_string(to_string(f)) == f);
}
