#pragma once

#include "inpsim/core.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace inpsim::stats {

// Linear interpolation between order statistics (Hyndman-Fan type 7).
// q in [0, 1]; `sorted` must be ascending and non-empty.
double percentile_sorted(std::span<const double> sorted, double q);
double percentile(std::vector<double> values, double q);

enum class Feature { gas_price_gwei, block_size_kb, block_tx_count };

std::string_view to_string(Feature feature);
Feature feature_from_string(std::string_view name);
inline constexpr std::array<Feature, 3> kAllFeatures{Feature::gas_price_gwei, Feature::block_size_kb,
                                                     Feature::block_tx_count};

struct QuintileBinning {
    std::array<double, 4> breakpoints{};
    std::vector<int> labels;  // 1..5, parallel to the input values
    bool degenerate = false;  // all values equal

    [[nodiscard]] std::array<std::size_t, 5> populations() const;
};

// v <= b1 -> Q1, b(k-1) < v <= bk -> Qk, v > b4 -> Q5.
QuintileBinning assign_quintiles(std::span<const double> values);

// Mid-ranks (1-based) of the pooled values, in input order.
std::vector<double> mid_ranks(std::span<const double> values);

struct KWResult {
    double h_statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    double tie_correction = 1.0;
    bool degenerate = false;  // every pooled value equal
};

KWResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

struct DunnResult {
    std::size_t i = 0;  // group indices, i < j
    std::size_t j = 0;
    double z = 0.0;
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    bool significant = false;
};

std::vector<DunnResult> dunn_posthoc(const std::vector<std::vector<double>>& groups, double alpha = 0.05);

enum class Magnitude { negligible, small, medium, large };

std::string_view to_string(Magnitude magnitude);
Magnitude magnitude_of(double delta);

struct CliffsDelta {
    double delta = 0.0;
    long long greater = 0;  // pairs with x > y
    long long less = 0;     // pairs with x < y
    Magnitude magnitude = Magnitude::negligible;
};

CliffsDelta cliffs_delta(std::span<const double> a, std::span<const double> b);

// Regularized upper incomplete gamma Q(df/2, x/2).
double chi2_upper_tail(double x, int df);
double regularized_gamma_q(double a, double x);
double normal_two_sided_p(double z);

struct BoxSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double whisker_low = 0.0;   // most extreme values within 1.5 IQR of the box
    double whisker_high = 0.0;
    std::vector<double> outliers;
};

BoxSummary box_summary(std::vector<double> values);

struct PairRow {
    DunnResult dunn;
    CliffsDelta cliff;
};

struct QuintileReport {
    Feature feature = Feature::gas_price_gwei;
    std::array<double, 4> breakpoints{};
    std::array<BoxSummary, 5> boxes;
    KWResult kw;
    std::vector<PairRow> pairs;  // all 10 unordered quintile pairs
};

// `feature` and `latency` are parallel. Needs at least 25 records and five
// non-empty quintiles.
QuintileReport build_report(std::span<const double> feature, std::span<const double> latency, Feature which);

}  // namespace inpsim::stats
