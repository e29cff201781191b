#include "inpsim/core.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <memory>

namespace inpsim {

std::string_view to_string(Errc code)
{
    switch (code) {
    case Errc::unknown_sender: return "UnknownSender";
    case Errc::nonce_gap: return "NonceGap";
    case Errc::insufficient_balance: return "InsufficientBalance";
    case Errc::no_validators: return "NoValidators";
    case Errc::not_yet_included: return "NotYetIncluded";
    case Errc::unknown_transaction: return "UnknownTransaction";
    case Errc::service_cap_exceeded: return "ServiceCapExceeded";
    case Errc::duplicate_service_id: return "DuplicateServiceId";
    case Errc::not_a_provider: return "NotAProvider";
    case Errc::not_a_consumer: return "NotAConsumer";
    case Errc::unknown_service: return "UnknownService";
    case Errc::unknown_provider: return "UnknownProvider";
    case Errc::no_active_agreement: return "NoActiveAgreement";
    case Errc::zero_breaches: return "ZeroBreaches";
    case Errc::threshold_not_reached: return "ThresholdNotReached";
    case Errc::unknown_op_kind: return "UnknownOpKind";
    case Errc::gas_mismatch: return "GasMismatch";
    case Errc::empty_group: return "EmptyGroup";
    case Errc::simulation_failure: return "SimulationFailure";
    case Errc::too_few_values: return "TooFewValues";
    case Errc::too_few_records: return "TooFewRecords";
    case Errc::degenerate_binning: return "DegenerateBinning";
    case Errc::config_parse: return "ConfigParse";
    case Errc::incomplete_bundle: return "IncompleteBundle";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::out_of_gas: return "OutOfGas";
    }
    return "Unknown";
}

Sha256 sha256(std::span<const std::uint8_t> bytes)
{
    Sha256 out{};
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    return out;
}

Sha256 sha256(std::string_view text)
{
    return sha256(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string to_hex(std::span<const std::uint8_t> bytes)
{
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) fmt::format_to(std::back_inserter(out), "{:02x}", b);
    return out;
}

Address Address::derive(std::string_view domain, std::uint64_t seed, std::uint64_t index)
{
    const auto digest = sha256(fmt::format("{}/{}/{}", domain, seed, index));
    Address a;
    std::copy_n(digest.begin(), a.bytes.size(), a.bytes.begin());
    return a;
}

std::string Address::hex() const { return "0x" + to_hex(bytes); }

bool Address::is_zero() const noexcept
{
    for (auto b : bytes)
        if (b != 0) return false;
    return true;
}

std::string format_seconds(Millis t)
{
    const auto ms = t.count();
    const char* sign = ms < 0 ? "-" : "";
    const auto abs_ms = ms < 0 ? -ms : ms;
    return fmt::format("{}{}.{:03}", sign, abs_ms / 1000, abs_ms % 1000);
}

double to_seconds(Millis t) { return static_cast<double>(t.count()) / 1000.0; }

}  // namespace inpsim
