#include "inpsim/rng.hpp"

#include "inpsim/core.hpp"

#include <cmath>
#include <random>

namespace inpsim {

std::string_view to_string(Distribution::Kind kind)
{
    switch (kind) {
    case Distribution::Kind::constant: return "constant";
    case Distribution::Kind::uniform: return "uniform";
    case Distribution::Kind::lognormal: return "lognormal";
    }
    return "unknown";
}

void Distribution::validate() const
{
    if (!std::isfinite(a) || !std::isfinite(b) || a < 0.0 || b < 0.0)
        throw Error(Errc::invalid_argument, "distribution parameters must be finite and non-negative");
    if (kind == Kind::uniform && a > b) throw Error(Errc::invalid_argument, "uniform(lo, hi) requires lo <= hi");
}

double Distribution::sample(CounterRng& rng) const
{
    switch (kind) {
    case Kind::constant: return a;
    case Kind::uniform: return a + (b - a) * rng.uniform01();
    case Kind::lognormal: {
        std::lognormal_distribution<double> dist(a, b);
        return dist(rng);
    }
    }
    return a;
}

double Distribution::mean() const
{
    switch (kind) {
    case Kind::constant: return a;
    case Kind::uniform: return 0.5 * (a + b);
    case Kind::lognormal: return std::exp(a + 0.5 * b * b);
    }
    return a;
}

}  // namespace inpsim
