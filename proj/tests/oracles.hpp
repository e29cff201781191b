#pragma once

// Slow reference implementations shared by the unit tests and the acceptance run.

#include "inpsim/stats.hpp"

#include <vector>

namespace inpsim::oracle {

// Ranks by counting, H from the between/total sum-of-squares form.
inline double brute_force_h(const std::vector<std::vector<double>>& groups)
{
    std::vector<double> pooled;
    for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
    const auto rank_of = [&](double v) {
        double less = 0, equal = 0;
        for (double w : pooled) {
            less += w < v ? 1 : 0;
            equal += w == v ? 1 : 0;
        }
        return less + (equal + 1.0) / 2.0;
    };
    const double n = static_cast<double>(pooled.size());
    const double rbar = (n + 1.0) / 2.0;
    double between = 0.0, total = 0.0;
    for (const auto& g : groups) {
        double sum = 0.0;
        for (double v : g) {
            const double r = rank_of(v);
            sum += r;
            total += (r - rbar) * (r - rbar);
        }
        const double mean = sum / static_cast<double>(g.size());
        between += static_cast<double>(g.size()) * (mean - rbar) * (mean - rbar);
    }
    return (n - 1.0) * between / total;
}

inline stats::CliffsDelta brute_force_cliff(const std::vector<double>& a, const std::vector<double>& b)
{
    stats::CliffsDelta r;
    for (double x : a)
        for (double y : b) {
            r.greater += x > y ? 1 : 0;
            r.less += x < y ? 1 : 0;
        }
    r.delta = static_cast<double>(r.greater - r.less) / static_cast<double>(a.size() * b.size());
    return r;
}

}  // namespace inpsim::oracle
