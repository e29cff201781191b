#pragma once

#include "inpsim/core.hpp"
#include "inpsim/gas.hpp"

#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace inpsim::contracts {

enum class Role { consumer, provider, validator, background };

std::string_view to_string(Role role);

struct Service {
    std::uint64_t service_id = 0;
    Address provider;
    std::string location;
    std::uint64_t cost = 0;

    bool operator==(const Service&) const = default;
};

struct Selection {
    Address consumer;
    Address provider;
    std::uint64_t service_id = 0;

    bool operator==(const Selection&) const = default;
};

enum class ContractId { add_service, select_service, register_breach, calculate_penalty };

struct ContractEvent {
    enum class Kind { service_added, service_selected, breach_registered, penalty_calculated };

    Kind kind = Kind::service_added;
    ContractId emitter = ContractId::add_service;
    std::vector<std::string> args;  // "name=value", in emit order
    std::uint64_t block_number = 0;
    TxId tx_id;

    bool operator==(const ContractEvent&) const = default;
};

std::string_view to_string(ContractEvent::Kind kind);

// Harness request raised when a provider's breach count reaches max_breach.
struct PenaltyTrigger {
    Address provider;
    std::uint64_t breach_count = 0;

    bool operator==(const PenaltyTrigger&) const = default;
};

struct CallResult {
    GasReceipt receipt;
    ContractEvent event;
    std::optional<PenaltyTrigger> trigger;
    std::optional<std::uint64_t> penalty;
};

struct ContractsConfig {
    std::size_t max_services_per_provider = 5;
    std::uint64_t max_breach = 3;
    std::uint64_t fidelity_fee = 1;
    bool reset_on_penalty = false;
    // Fail any call whose receipt disagrees with a published table cell.
    bool strict_gas = true;
    GasSchedule schedule = default_schedule();

    bool operator==(const ContractsConfig&) const = default;
};

// Calls as carried by transactions. OpaqueCall is non-marketplace traffic
// that burns a fixed amount of gas.
struct AddServiceCall {
    std::uint64_t service_id = 0;
    std::string location;
    std::uint64_t cost = 0;
};
struct SelectServiceCall {
    Address provider;
    std::uint64_t service_id = 0;
};
struct RegisterBreachCall {
    std::uint64_t num_breaches = 1;
};
struct CalculatePenaltyCall {
    Address user;
};
struct OpaqueCall {
    Gas gas = 21'000;
};

using ContractCall = std::variant<AddServiceCall, SelectServiceCall, RegisterBreachCall, CalculatePenaltyCall, OpaqueCall>;

std::optional<Function> function_of(const ContractCall& call);
// ABI calldata length: 4-byte selector + 32 bytes per word.
std::size_t calldata_bytes(const ContractCall& call);

// Joint state of AddService, SelectService, RegisterBreach and
// CalculatePenalty. Every state-changing call validates before mutating, so a
// throwing call leaves the world untouched and emits nothing.
class ContractWorld {
  public:
    explicit ContractWorld(ContractsConfig config = {});

    // Off-chain identity assertion; roles gate the marketplace calls.
    void register_actor(const Address& who, Role role);
    [[nodiscard]] std::optional<Role> role_of(const Address& who) const;

    CallResult add_service(const Address& provider, std::uint64_t service_id, std::string location, std::uint64_t cost);
    CallResult select_service(const Address& consumer, const Address& provider, std::uint64_t service_id);
    CallResult register_breach(const Address& provider, std::uint64_t num_breaches);
    CallResult calculate_penalty(const Address& caller, const Address& user);

    // Dispatch a transaction call with msg.sender = sender. OpaqueCall is not
    // a contract call and is rejected with invalid_argument. A call whose gas
    // exceeds gas_limit throws out_of_gas without touching state.
    CallResult execute(const Address& sender, const ContractCall& call, std::uint64_t block_number = 0, TxId tx_id = {},
                       Gas gas_limit = std::numeric_limits<Gas>::max());

    [[nodiscard]] const Service& get_service(const Address& provider, std::uint64_t service_id) const;
    [[nodiscard]] const std::vector<Service>& services_of(const Address& provider) const;
    [[nodiscard]] const std::vector<Address>& provider_addresses() const { return provider_addresses_; }
    [[nodiscard]] const std::vector<Selection>& selections() const { return selections_; }
    [[nodiscard]] std::uint64_t breaches(const Address& provider) const;
    [[nodiscard]] std::uint64_t penalty(const Address& user) const;
    [[nodiscard]] const std::vector<ContractEvent>& events() const { return events_; }
    [[nodiscard]] const ContractsConfig& config() const { return config_; }

    // Content hash of the full state, event log included.
    [[nodiscard]] Sha256 digest() const;

    bool operator==(const ContractWorld&) const = default;

  private:
    enum class SlotKind { provider_services, consumer_selections, breach };

    GasReceipt make_receipt(Function fn, std::vector<MicroOp> ops, bool cold_path, int position,
                            bool published_path = true) const;
    CallResult finish(GasReceipt receipt, ContractEvent event);

    ContractsConfig config_;
    std::map<Address, Role> roles_;
    std::map<Address, std::vector<Service>> services_;
    std::vector<Address> provider_addresses_;
    std::vector<Selection> selections_;
    std::map<Address, std::uint64_t> selections_by_consumer_;
    std::map<Address, std::uint64_t> selections_by_provider_;
    std::map<Address, std::uint64_t> breaches_;
    std::map<Address, std::uint64_t> penalties_;
    std::set<std::pair<SlotKind, Address>> accessed_;
    std::vector<ContractEvent> events_;
    Gas gas_budget_ = std::numeric_limits<Gas>::max();
};

// Mock oracle feed.
struct KpiReport {
    enum class Direction { must_exceed, must_not_exceed };

    Address provider;
    std::string metric_name;
    double observed = 0.0;
    double threshold = 0.0;
    Direction direction = Direction::must_exceed;
};

struct BreachSubmission {
    Address provider;
    std::uint64_t num_breaches = 1;
};

// A report that violates its threshold becomes one register_breach call.
std::optional<BreachSubmission> fetch_oracle_report(const KpiReport& report);

}  // namespace inpsim::contracts
