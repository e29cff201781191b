#include "inpsim/contracts.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace inpsim::contracts {

namespace {

constexpr std::size_t kMaxShortString = 31;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::string_view to_string(Role role)
{
    switch (role) {
    case Role::consumer: return "consumer";
    case Role::provider: return "provider";
    case Role::validator: return "validator";
    case Role::background: return "background";
    }
    return "unknown";
}

std::string_view to_string(ContractEvent::Kind kind)
{
    switch (kind) {
    case ContractEvent::Kind::service_added: return "ServiceAdded";
    case ContractEvent::Kind::service_selected: return "ServiceSelected";
    case ContractEvent::Kind::breach_registered: return "BreachRegistered";
    case ContractEvent::Kind::penalty_calculated: return "PenaltyCalculated";
    }
    return "Unknown";
}

std::optional<Function> function_of(const ContractCall& call)
{
    return std::visit(overloaded{
                          [](const AddServiceCall&) -> std::optional<Function> { return Function::add_service; },
                          [](const SelectServiceCall&) -> std::optional<Function> { return Function::select_service; },
                          [](const RegisterBreachCall&) -> std::optional<Function> { return Function::register_breach; },
                          [](const CalculatePenaltyCall&) -> std::optional<Function> {
                              return Function::calculate_penalty;
                          },
                          [](const OpaqueCall&) -> std::optional<Function> { return std::nullopt; },
                      },
                      call);
}

std::size_t calldata_bytes(const ContractCall& call)
{
    const std::size_t words = std::visit(overloaded{
                                             // id, string offset, cost, string length, string data
                                             [](const AddServiceCall&) -> std::size_t { return 5; },
                                             [](const SelectServiceCall&) -> std::size_t { return 2; },
                                             [](const RegisterBreachCall&) -> std::size_t { return 1; },
                                             [](const CalculatePenaltyCall&) -> std::size_t { return 1; },
                                             [](const OpaqueCall&) -> std::size_t { return 0; },
                                         },
                                         call);
    return words == 0 ? 0 : 4 + 32 * words;
}

ContractWorld::ContractWorld(ContractsConfig config) : config_(std::move(config))
{
    if (config_.max_breach == 0) throw Error(Errc::invalid_argument, "max_breach must be positive");
    if (config_.fidelity_fee == 0) throw Error(Errc::invalid_argument, "fidelity_fee must be positive");
}

void ContractWorld::register_actor(const Address& who, Role role) { roles_[who] = role; }

std::optional<Role> ContractWorld::role_of(const Address& who) const
{
    if (auto it = roles_.find(who); it != roles_.end()) return it->second;
    return std::nullopt;
}

GasReceipt ContractWorld::make_receipt(Function fn, std::vector<MicroOp> ops, bool cold_path, int position,
                                       bool published_path) const
{
    GasReceipt receipt;
    receipt.function = fn;
    receipt.total = price_receipt(ops, config_.schedule);
    receipt.micro_ops = std::move(ops);
    receipt.cold_path = cold_path;
    receipt.position = position;
    if (receipt.total > gas_budget_)
        throw Error(Errc::out_of_gas, fmt::format("{} needs {} gas, limit {}", to_string(fn), receipt.total, gas_budget_));
    if (config_.strict_gas && published_path) {
        if (auto expected = published_total(fn, cold_path, position); expected && *expected != receipt.total) {
            throw Error(Errc::gas_mismatch, fmt::format("{} (cold={}, position={}): expected {}, priced {}",
                                                        to_string(fn), cold_path, position, *expected, receipt.total));
        }
    }
    return receipt;
}

CallResult ContractWorld::finish(GasReceipt receipt, ContractEvent event)
{
    events_.push_back(event);
    return CallResult{std::move(receipt), std::move(event), std::nullopt, std::nullopt};
}

CallResult ContractWorld::add_service(const Address& provider, std::uint64_t service_id, std::string location,
                                      std::uint64_t cost)
{
    if (role_of(provider) != Role::provider) throw Error(Errc::not_a_provider, provider.hex());
    if (service_id == 0) throw Error(Errc::invalid_argument, "service_id must be positive");
    if (location.size() > kMaxShortString) throw Error(Errc::invalid_argument, "location longer than 31 bytes");

    const auto it = services_.find(provider);
    const bool first = it == services_.end() || it->second.empty();
    if (!first) {
        if (it->second.size() >= config_.max_services_per_provider)
            throw Error(Errc::service_cap_exceeded,
                        fmt::format("{} already offers {} services", provider.hex(), it->second.size()));
        for (const auto& s : it->second)
            if (s.service_id == service_id)
                throw Error(Errc::duplicate_service_id, fmt::format("{} id {}", provider.hex(), service_id));
    } else if (config_.max_services_per_provider == 0) {
        throw Error(Errc::service_cap_exceeded, provider.hex());
    }

    auto receipt = make_receipt(Function::add_service, trace_add_service(first), first, 0);

    auto& list = services_[provider];
    list.push_back(Service{service_id, provider, location, cost});
    accessed_.emplace(SlotKind::provider_services, provider);
    if (std::find(provider_addresses_.begin(), provider_addresses_.end(), provider) == provider_addresses_.end())
        provider_addresses_.push_back(provider);

    ContractEvent event{ContractEvent::Kind::service_added,
                        ContractId::add_service,
                        {"provider=" + provider.hex(), fmt::format("serviceId={}", service_id), "location=" + location,
                         fmt::format("cost={}", cost)},
                        0,
                        {}};
    return finish(std::move(receipt), std::move(event));
}

CallResult ContractWorld::select_service(const Address& consumer, const Address& provider, std::uint64_t service_id)
{
    if (role_of(consumer) != Role::consumer) throw Error(Errc::not_a_consumer, consumer.hex());
    const auto it = services_.find(provider);
    if (it == services_.end() || it->second.empty()) throw Error(Errc::unknown_provider, provider.hex());
    const auto& list = it->second;
    const auto pos_it = std::find_if(list.begin(), list.end(), [&](const Service& s) { return s.service_id == service_id; });
    if (pos_it == list.end()) throw Error(Errc::unknown_service, fmt::format("{} id {}", provider.hex(), service_id));
    const int position = static_cast<int>(pos_it - list.begin()) + 1;

    const bool first = !accessed_.contains({SlotKind::consumer_selections, consumer});
    auto receipt = make_receipt(Function::select_service, trace_select_service(first, position), first, position);

    selections_.push_back(Selection{consumer, provider, service_id});
    ++selections_by_consumer_[consumer];
    ++selections_by_provider_[provider];
    accessed_.emplace(SlotKind::consumer_selections, consumer);

    ContractEvent event{ContractEvent::Kind::service_selected,
                        ContractId::select_service,
                        {"consumer=" + consumer.hex(), "provider=" + provider.hex(),
                         fmt::format("serviceId={}", service_id)},
                        0,
                        {}};
    return finish(std::move(receipt), std::move(event));
}

CallResult ContractWorld::register_breach(const Address& provider, std::uint64_t num_breaches)
{
    if (num_breaches == 0) throw Error(Errc::zero_breaches, provider.hex());
    if (!selections_by_provider_.contains(provider)) throw Error(Errc::no_active_agreement, provider.hex());

    const std::uint64_t before = breaches(provider);
    const bool cold_read = !accessed_.contains({SlotKind::breach, provider});
    const bool init_write = before == 0;
    // A reset breach slot is read warm but written from zero; that mixed path
    // has no published total.
    auto receipt = make_receipt(Function::register_breach, trace_register_breach(cold_read, init_write),
                                cold_read || init_write, 0, cold_read == init_write);

    const std::uint64_t room = config_.max_breach > before ? config_.max_breach - before : 0;
    const std::uint64_t after = before + std::min(num_breaches, room);
    breaches_[provider] = after;
    accessed_.emplace(SlotKind::breach, provider);

    ContractEvent event{ContractEvent::Kind::breach_registered,
                        ContractId::register_breach,
                        {"sender=" + provider.hex(), fmt::format("numBreaches={}", num_breaches)},
                        0,
                        {}};
    auto result = finish(std::move(receipt), std::move(event));
    if (before < config_.max_breach && after >= config_.max_breach) result.trigger = PenaltyTrigger{provider, after};
    return result;
}

CallResult ContractWorld::calculate_penalty(const Address& /*caller*/, const Address& user)
{
    const std::uint64_t count = breaches(user);
    if (count < config_.max_breach)
        throw Error(Errc::threshold_not_reached,
                    fmt::format("{} has {} of {} breaches", user.hex(), count, config_.max_breach));

    const std::uint64_t amount = config_.fidelity_fee * count;
    const bool init_write = penalty(user) == 0;
    auto receipt = make_receipt(Function::calculate_penalty, trace_calculate_penalty(init_write), init_write, 0);

    penalties_[user] = amount;
    if (config_.reset_on_penalty) breaches_[user] = 0;

    ContractEvent event{ContractEvent::Kind::penalty_calculated,
                        ContractId::calculate_penalty,
                        {"user=" + user.hex(), fmt::format("penalty={}", amount)},
                        0,
                        {}};
    auto result = finish(std::move(receipt), std::move(event));
    result.penalty = amount;
    return result;
}

CallResult ContractWorld::execute(const Address& sender, const ContractCall& call, std::uint64_t block_number, TxId tx_id,
                                  Gas gas_limit)
{
    struct BudgetGuard {
        Gas& slot;
        ~BudgetGuard() { slot = std::numeric_limits<Gas>::max(); }
    } guard{gas_budget_};
    gas_budget_ = gas_limit;
    auto result = std::visit(
        overloaded{
            [&](const AddServiceCall& c) { return add_service(sender, c.service_id, c.location, c.cost); },
            [&](const SelectServiceCall& c) { return select_service(sender, c.provider, c.service_id); },
            [&](const RegisterBreachCall& c) { return register_breach(sender, c.num_breaches); },
            [&](const CalculatePenaltyCall& c) { return calculate_penalty(sender, c.user); },
            [&](const OpaqueCall&) -> CallResult {
                throw Error(Errc::invalid_argument, "opaque call is not a marketplace call");
            },
        },
        call);
    result.event.block_number = block_number;
    result.event.tx_id = tx_id;
    events_.back().block_number = block_number;
    events_.back().tx_id = tx_id;
    return result;
}

const Service& ContractWorld::get_service(const Address& provider, std::uint64_t service_id) const
{
    if (auto it = services_.find(provider); it != services_.end()) {
        for (const auto& s : it->second)
            if (s.service_id == service_id) return s;
    }
    throw Error(Errc::unknown_service, fmt::format("{} id {}", provider.hex(), service_id));
}

const std::vector<Service>& ContractWorld::services_of(const Address& provider) const
{
    static const std::vector<Service> empty;
    if (auto it = services_.find(provider); it != services_.end()) return it->second;
    return empty;
}

std::uint64_t ContractWorld::breaches(const Address& provider) const
{
    auto it = breaches_.find(provider);
    return it == breaches_.end() ? 0 : it->second;
}

std::uint64_t ContractWorld::penalty(const Address& user) const
{
    auto it = penalties_.find(user);
    return it == penalties_.end() ? 0 : it->second;
}

Sha256 ContractWorld::digest() const
{
    std::string s;
    auto out = std::back_inserter(s);
    for (const auto& [who, role] : roles_) fmt::format_to(out, "R{}:{};", who.hex(), to_string(role));
    for (const auto& [who, list] : services_) {
        fmt::format_to(out, "S{}:", who.hex());
        for (const auto& svc : list) fmt::format_to(out, "({},{},{});", svc.service_id, svc.location, svc.cost);
    }
    for (const auto& p : provider_addresses_) fmt::format_to(out, "P{};", p.hex());
    for (const auto& sel : selections_)
        fmt::format_to(out, "L{},{},{};", sel.consumer.hex(), sel.provider.hex(), sel.service_id);
    for (const auto& [who, n] : breaches_) fmt::format_to(out, "B{}:{};", who.hex(), n);
    for (const auto& [who, n] : penalties_) fmt::format_to(out, "Y{}:{};", who.hex(), n);
    for (const auto& [kind, who] : accessed_) fmt::format_to(out, "A{}:{};", static_cast<int>(kind), who.hex());
    for (const auto& ev : events_) {
        fmt::format_to(out, "E{}@{}/{}:", to_string(ev.kind), ev.block_number, ev.tx_id.value);
        for (const auto& a : ev.args) fmt::format_to(out, "{},", a);
    }
    return sha256(s);
}

std::optional<BreachSubmission> fetch_oracle_report(const KpiReport& report)
{
    if (!std::isfinite(report.observed) || !std::isfinite(report.threshold))
        throw Error(Errc::invalid_argument, "KPI report fields must be finite");
    const bool violated = report.direction == KpiReport::Direction::must_exceed ? report.observed < report.threshold
                                                                                : report.observed > report.threshold;
    if (!violated) return std::nullopt;
    return BreachSubmission{report.provider, 1};
}

}  // namespace inpsim::contracts
