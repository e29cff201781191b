#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

namespace inpsim {

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based generator: every (seed, stream, slot, index) key names an
// independent SplitMix64 sequence, so any consumer can be replayed alone.
class CounterRng {
  public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::string_view stream, std::uint64_t slot, std::uint64_t index = 0) noexcept
        : state_(key(seed, stream, slot, index))
    {
    }

    static constexpr std::uint64_t key(std::uint64_t seed, std::string_view stream, std::uint64_t slot,
                                       std::uint64_t index) noexcept
    {
        std::uint64_t k = splitmix64_mix(seed + 0x9e3779b97f4a7c15ULL);
        k = splitmix64_mix(k ^ fnv1a64(stream));
        k = splitmix64_mix(k ^ (slot * 0xd1b54a32d192ed03ULL));
        k = splitmix64_mix(k ^ (index * 0x8cb92ba72f3d8dd7ULL));
        return k;
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        state_ += 0x9e3779b97f4a7c15ULL;
        return splitmix64_mix(state_);
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  private:
    std::uint64_t state_;
};

// Parametric distribution descriptor for background traffic attributes.
//   constant(v)         -> v
//   uniform(lo, hi)     -> U[lo, hi)
//   lognormal(mu, sigma)-> exp(N(mu, sigma))
struct Distribution {
    enum class Kind { constant, uniform, lognormal };

    Kind kind = Kind::constant;
    double a = 0.0;
    double b = 0.0;

    static Distribution constant(double v) { return {Kind::constant, v, 0.0}; }
    static Distribution uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
    static Distribution lognormal(double mu, double sigma) { return {Kind::lognormal, mu, sigma}; }

    // Throws Error(invalid_argument) for non-finite / negative parameters or lo > hi.
    void validate() const;
    double sample(CounterRng& rng) const;
    [[nodiscard]] double mean() const;

    bool operator==(const Distribution&) const = default;
};

std::string_view to_string(Distribution::Kind kind);

}  // namespace inpsim
