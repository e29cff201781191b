#include "inpsim/stats.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace inpsim::stats {

namespace {

// Sum of (t^3 - t) over tie blocks of an ascending sequence.
double tie_sum(std::vector<double> sorted)
{
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        sum += t * t * t - t;
        i = j;
    }
    return sum;
}

struct Pooled {
    std::vector<double> values;
    std::vector<double> rank_sums;
    std::vector<double> sizes;
    double n = 0.0;
};

Pooled pool(const std::vector<std::vector<double>>& groups)
{
    if (groups.size() < 2) throw Error(Errc::invalid_argument, "need at least two groups");
    Pooled p;
    for (const auto& g : groups) {
        if (g.empty()) throw Error(Errc::empty_group, "every group needs at least one value");
        for (double v : g)
            if (!std::isfinite(v)) throw Error(Errc::invalid_argument, "non-finite observation");
        p.values.insert(p.values.end(), g.begin(), g.end());
        p.sizes.push_back(static_cast<double>(g.size()));
    }
    if (p.values.size() < 3) throw Error(Errc::too_few_values, fmt::format("N = {}", p.values.size()));
    p.n = static_cast<double>(p.values.size());

    const auto ranks = mid_ranks(p.values);
    std::size_t offset = 0;
    for (const auto& g : groups) {
        p.rank_sums.push_back(std::accumulate(ranks.begin() + static_cast<std::ptrdiff_t>(offset),
                                              ranks.begin() + static_cast<std::ptrdiff_t>(offset + g.size()), 0.0));
        offset += g.size();
    }
    return p;
}

Magnitude magnitude_from_counts(long long diff, long long pairs)
{
    // |delta| <= t  <=>  1000 |diff| <= 1000 t * pairs, done in integers.
    const long long scaled = 1000 * (diff < 0 ? -diff : diff);
    if (scaled <= 147 * pairs) return Magnitude::negligible;
    if (scaled <= 330 * pairs) return Magnitude::small;
    if (scaled <= 474 * pairs) return Magnitude::medium;
    return Magnitude::large;
}

}  // namespace

double percentile_sorted(std::span<const double> sorted, double q)
{
    if (sorted.empty()) throw Error(Errc::too_few_values, "percentile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw Error(Errc::invalid_argument, "quantile must be in [0, 1]");
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double percentile(std::vector<double> values, double q)
{
    std::sort(values.begin(), values.end());
    return percentile_sorted(values, q);
}

std::string_view to_string(Feature feature)
{
    switch (feature) {
    case Feature::gas_price_gwei: return "gas_price_gwei";
    case Feature::block_size_kb: return "block_size_kb";
    case Feature::block_tx_count: return "block_tx_count";
    }
    return "unknown";
}

Feature feature_from_string(std::string_view name)
{
    for (auto f : kAllFeatures)
        if (to_string(f) == name) return f;
    throw Error(Errc::invalid_argument, fmt::format("unknown feature '{}'", name));
}

std::array<std::size_t, 5> QuintileBinning::populations() const
{
    std::array<std::size_t, 5> pop{};
    for (int l : labels) ++pop[static_cast<std::size_t>(l - 1)];
    return pop;
}

QuintileBinning assign_quintiles(std::span<const double> values)
{
    if (values.size() < 5) throw Error(Errc::too_few_values, fmt::format("{} values, need 5", values.size()));
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());

    QuintileBinning out;
    for (std::size_t k = 0; k < 4; ++k) out.breakpoints[k] = percentile_sorted(sorted, 0.2 * static_cast<double>(k + 1));
    out.degenerate = sorted.front() == sorted.back();
    out.labels.reserve(values.size());
    for (double v : values) {
        const auto it = std::lower_bound(out.breakpoints.begin(), out.breakpoints.end(), v);
        out.labels.push_back(static_cast<int>(it - out.breakpoints.begin()) + 1);
    }
    return out;
}

std::vector<double> mid_ranks(std::span<const double> values)
{
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mid;
        i = j;
    }
    return ranks;
}

KWResult kruskal_wallis(const std::vector<std::vector<double>>& groups)
{
    const Pooled p = pool(groups);
    KWResult r;
    r.df = static_cast<int>(groups.size()) - 1;
    const double n = p.n;
    r.tie_correction = 1.0 - tie_sum(p.values) / (n * n * n - n);
    if (r.tie_correction <= 0.0) {
        r.degenerate = true;
        r.tie_correction = 0.0;
        return r;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < groups.size(); ++i) s += p.rank_sums[i] * p.rank_sums[i] / p.sizes[i];
    const double h = 12.0 / (n * (n + 1.0)) * s - 3.0 * (n + 1.0);
    r.h_statistic = std::max(0.0, h / r.tie_correction);
    r.p_value = chi2_upper_tail(r.h_statistic, r.df);
    return r;
}

std::vector<DunnResult> dunn_posthoc(const std::vector<std::vector<double>>& groups, double alpha)
{
    const Pooled p = pool(groups);
    const double n = p.n;
    const double variance = n * (n + 1.0) / 12.0 - tie_sum(p.values) / (12.0 * (n - 1.0));
    const std::size_t k = groups.size();
    const double m = static_cast<double>(k * (k - 1) / 2);

    std::vector<DunnResult> out;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            DunnResult d{i, j};
            const double gap = p.rank_sums[i] / p.sizes[i] - p.rank_sums[j] / p.sizes[j];
            const double se = std::sqrt(std::max(0.0, variance) * (1.0 / p.sizes[i] + 1.0 / p.sizes[j]));
            d.z = se > 0.0 ? gap / se : 0.0;
            d.p_raw = normal_two_sided_p(d.z);
            d.p_adjusted = std::min(1.0, m * d.p_raw);
            d.significant = d.p_adjusted < alpha;
            out.push_back(d);
        }
    }
    return out;
}

std::string_view to_string(Magnitude magnitude)
{
    switch (magnitude) {
    case Magnitude::negligible: return "negligible";
    case Magnitude::small: return "small";
    case Magnitude::medium: return "medium";
    case Magnitude::large: return "large";
    }
    return "unknown";
}

Magnitude magnitude_of(double delta)
{
    const double a = std::abs(delta);
    if (a <= 0.147) return Magnitude::negligible;
    if (a <= 0.33) return Magnitude::small;
    if (a <= 0.474) return Magnitude::medium;
    return Magnitude::large;
}

CliffsDelta cliffs_delta(std::span<const double> a, std::span<const double> b)
{
    if (a.empty() || b.empty()) throw Error(Errc::empty_group, "Cliff's delta needs two non-empty samples");
    std::vector<double> sorted(b.begin(), b.end());
    std::sort(sorted.begin(), sorted.end());

    CliffsDelta r;
    for (double x : a) {
        r.greater += std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
        r.less += sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), x);
    }
    const long long pairs = static_cast<long long>(a.size()) * static_cast<long long>(b.size());
    r.delta = static_cast<double>(r.greater - r.less) / static_cast<double>(pairs);
    r.magnitude = magnitude_from_counts(r.greater - r.less, pairs);
    return r;
}

double regularized_gamma_q(double a, double x)
{
    if (!(a > 0.0) || !(x >= 0.0)) throw Error(Errc::invalid_argument, "gamma Q needs a > 0 and x >= 0");
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    const double log_prefix = a * std::log(x) - x - std::lgamma(a);
    constexpr double eps = 1e-16;
    constexpr int max_iter = 10'000;

    if (x < a + 1.0) {
        // P by its power series, Q = 1 - P.
        double term = 1.0 / a;
        double sum = term;
        for (int n = 1; n < max_iter; ++n) {
            term *= x / (a + n);
            sum += term;
            if (std::abs(term) < std::abs(sum) * eps) break;
        }
        return std::clamp(1.0 - sum * std::exp(log_prefix), 0.0, 1.0);
    }

    // Continued fraction for Q, modified Lentz.
    constexpr double tiny = std::numeric_limits<double>::min() / eps;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < max_iter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < eps) break;
    }
    return std::clamp(std::exp(log_prefix) * h, 0.0, 1.0);
}

double chi2_upper_tail(double x, int df)
{
    if (df <= 0) throw Error(Errc::invalid_argument, "df must be positive");
    if (std::isnan(x)) throw Error(Errc::invalid_argument, "chi-square statistic is NaN");
    if (x <= 0.0) return 1.0;
    return regularized_gamma_q(0.5 * df, 0.5 * x);
}

double normal_two_sided_p(double z)
{
    if (std::isnan(z)) throw Error(Errc::invalid_argument, "z is NaN");
    return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
}

BoxSummary box_summary(std::vector<double> values)
{
    BoxSummary s;
    s.n = values.size();
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    s.median = percentile_sorted(values, 0.5);
    s.q1 = percentile_sorted(values, 0.25);
    s.q3 = percentile_sorted(values, 0.75);
    const double iqr = s.q3 - s.q1;
    const double lo_fence = s.q1 - 1.5 * iqr;
    const double hi_fence = s.q3 + 1.5 * iqr;
    s.whisker_low = s.q1;
    s.whisker_high = s.q3;
    bool low_set = false;
    for (double v : values) {
        if (v < lo_fence || v > hi_fence) {
            s.outliers.push_back(v);
            continue;
        }
        if (!low_set) {
            s.whisker_low = v;
            low_set = true;
        }
        s.whisker_high = v;
    }
    return s;
}

QuintileReport build_report(std::span<const double> feature, std::span<const double> latency, Feature which)
{
    if (feature.size() != latency.size()) throw Error(Errc::invalid_argument, "feature and latency lengths differ");
    if (feature.size() < 25) throw Error(Errc::too_few_records, fmt::format("{} records, need 25", feature.size()));

    const auto binning = assign_quintiles(feature);
    const auto pop = binning.populations();
    for (std::size_t q = 0; q < 5; ++q)
        if (pop[q] == 0)
            throw Error(Errc::degenerate_binning,
                        fmt::format("{}: Q{} is empty (breakpoints {:.6g}, {:.6g}, {:.6g}, {:.6g})", to_string(which), q + 1,
                                    binning.breakpoints[0], binning.breakpoints[1], binning.breakpoints[2],
                                    binning.breakpoints[3]));

    std::vector<std::vector<double>> groups(5);
    for (std::size_t i = 0; i < latency.size(); ++i) groups[static_cast<std::size_t>(binning.labels[i] - 1)].push_back(latency[i]);

    QuintileReport report;
    report.feature = which;
    report.breakpoints = binning.breakpoints;
    for (std::size_t q = 0; q < 5; ++q) report.boxes[q] = box_summary(groups[q]);
    report.kw = kruskal_wallis(groups);
    for (const auto& d : dunn_posthoc(groups)) report.pairs.push_back({d, cliffs_delta(groups[d.i], groups[d.j])});
    return report;
}

}  // namespace inpsim::stats
