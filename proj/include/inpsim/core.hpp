#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace inpsim {

using Gas = std::uint64_t;
using Gwei = double;
// Simulated time since genesis. Millisecond resolution keeps latencies exact.
using Millis = std::chrono::milliseconds;

inline constexpr Gwei kOneWeiInGwei = 1e-9;

enum class Errc {
    // chain
    unknown_sender,
    nonce_gap,
    insufficient_balance,
    no_validators,
    not_yet_included,
    unknown_transaction,
    // contracts
    service_cap_exceeded,
    duplicate_service_id,
    not_a_provider,
    not_a_consumer,
    unknown_service,
    unknown_provider,
    no_active_agreement,
    zero_breaches,
    threshold_not_reached,
    unknown_op_kind,
    gas_mismatch,
    out_of_gas,
    // workload
    empty_group,
    simulation_failure,
    // stats
    too_few_values,
    too_few_records,
    degenerate_binning,
    // config / bundles
    config_parse,
    incomplete_bundle,
    invalid_argument,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    [[nodiscard]] Errc code() const noexcept { return code_; }

  private:
    Errc code_;
};

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::span<const std::uint8_t> bytes);
Sha256 sha256(std::string_view text);
std::string to_hex(std::span<const std::uint8_t> bytes);

// 20-byte account identifier. Identity is asserted, never signed.
struct Address {
    std::array<std::uint8_t, 20> bytes{};

    static Address derive(std::string_view domain, std::uint64_t seed, std::uint64_t index);

    [[nodiscard]] std::string hex() const;
    [[nodiscard]] bool is_zero() const noexcept;

    auto operator<=>(const Address&) const = default;
};

struct TxId {
    std::uint64_t value = 0;

    auto operator<=>(const TxId&) const = default;
};

// Whole seconds and milliseconds as "S.mmm"; exact and locale independent.
std::string format_seconds(Millis t);
double to_seconds(Millis t);

}  // namespace inpsim

template <>
struct std::hash<inpsim::Address> {
    std::size_t operator()(const inpsim::Address& a) const noexcept
    {
        std::size_t h = 0;
        for (std::size_t i = 0; i < 8; ++i) h = (h << 8) | a.bytes[i];
        return h;
    }
};

template <>
struct std::hash<inpsim::TxId> {
    std::size_t operator()(const inpsim::TxId& id) const noexcept
    {
        return std::hash<std::uint64_t>{}(id.value);
    }
};
