#include "inpsim/workload.hpp"

#include "inpsim/stats.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace inpsim::workload {

namespace {

using chain::Chain;
using chain::SimEvent;
using chain::Transaction;

struct Submission {
    Millis at{0};
    std::uint64_t seq = 0;  // tie-break, keeps nonce order
    Address sender;
    contracts::ContractCall call;
    Gas gas_limit = 0;
};

Millis jitter(std::uint64_t seed, std::string_view stream, std::uint64_t who, Millis slot)
{
    CounterRng rng(seed, stream, who);
    return Millis{static_cast<std::int64_t>(rng.uniform01() * static_cast<double>(slot.count()))};
}

Gwei suggested_tip(const FeePolicy& policy, const Chain& chain)
{
    if (policy.mode == FeePolicy::Mode::fixed) return policy.fixed_tip;
    auto tips = chain.recent_tips(policy.lookback_blocks);
    std::erase_if(tips, [](Gwei t) { return !(t > 0.0); });
    if (tips.empty()) return policy.fixed_tip;
    return stats::percentile(std::move(tips), policy.suggested_tip_quantile);
}

// Runs one cell's submission schedule slot by slot. Submissions dated inside a
// slot are sent before that slot's block is built.
class CellDriver {
  public:
    CellDriver(const ExperimentPlan& plan, Chain& chain, Phase phase, std::size_t batch, std::size_t round)
        : plan_(plan), chain_(chain), phase_(phase), batch_(batch), round_(round)
    {
    }

    void schedule(Submission s)
    {
        s.seq = next_seq_++;
        queue_.push_back(std::move(s));
    }

    // Called for every penalty trigger raised while driving.
    std::function<void(const Address& provider, Millis block_time)> on_trigger;

    // Advances until every scheduled transaction is submitted and included.
    void run_until_settled()
    {
        while (!queue_.empty() || outstanding_ > 0) {
            std::stable_sort(queue_.begin(), queue_.end(), [](const Submission& a, const Submission& b) {
                return a.at != b.at ? a.at < b.at : a.seq < b.seq;
            });
            const Millis block_time = chain_.next_block_time();
            std::size_t sent = 0;
            for (; sent < queue_.size() && queue_[sent].at < block_time; ++sent) submit(queue_[sent]);
            queue_.erase(queue_.begin(), queue_.begin() + static_cast<std::ptrdiff_t>(sent));
            step();
            if (++slots_ > plan_.max_slots_per_cell)
                throw Error(Errc::simulation_failure,
                            fmt::format("{} batch {} round {}: {} transactions still pending after {} slots",
                                        to_string(phase_), batch_, round_, outstanding_, plan_.max_slots_per_cell));
        }
    }

    void step()
    {
        for (auto& ev : chain_.advance_slot()) {
            const bool client = ev.tx_id.value != 0 && client_txs_.contains(ev.tx_id);
            if (ev.kind == SimEvent::Kind::tx_included || ev.kind == SimEvent::Kind::tx_reverted) {
                if (!client) continue;
                --outstanding_;
                if (ev.kind == SimEvent::Kind::tx_reverted)
                    throw Error(Errc::simulation_failure,
                                fmt::format("{} batch {} round {}: tx {} reverted: {}", to_string(phase_), batch_,
                                            round_, ev.tx_id.value, ev.detail));
                record(ev.tx_id);
            } else if (ev.kind == SimEvent::Kind::tx_finalized || ev.kind == SimEvent::Kind::tx_dropped) {
                if (!client) continue;
            }
            if (ev.kind == SimEvent::Kind::penalty_trigger && on_trigger) {
                const auto& r = chain_.receipt(ev.tx_id);
                on_trigger(r.call->trigger->provider, chain_.block(ev.block_number).timestamp);
            }
            events_.push_back(EventRecord{std::string(to_string(phase_)), batch_, round_, ev.block_number,
                                          ev.tx_id.value, std::string(chain::to_string(ev.kind)), ev.detail});
        }
    }

    CellResult finish()
    {
        CellResult out;
        out.records = std::move(records_);
        out.events = std::move(events_);
        for (const auto& b : chain_.blocks()) {
            if (b.number == 0) continue;
            out.blocks.push_back(BlockRecord{std::string(to_string(phase_)), batch_, round_, b.number,
                                             to_seconds(b.timestamp), b.proposer.hex(), b.transactions.size(),
                                             b.gas_used, b.byte_size, b.base_fee});
        }
        out.end_time_s = to_seconds(chain_.now());
        std::sort(out.records.begin(), out.records.end(),
                  [](const TxRecord& a, const TxRecord& b) { return a.tx_id < b.tx_id; });
        return out;
    }

  private:
    void submit(const Submission& s)
    {
        chain_.advance_clock(std::max(s.at, chain_.now()));
        Transaction tx;
        tx.sender = s.sender;
        tx.nonce = nonces_[s.sender]++;
        tx.call = s.call;
        tx.gas_limit = s.gas_limit;
        tx.priority_fee = suggested_tip(plan_.fee_policy, chain_);
        tx.max_fee = plan_.fee_policy.max_fee_base_multiplier * chain_.next_base_fee() + tx.priority_fee;
        const auto receipt = chain_.submit_transaction(std::move(tx));
        client_txs_.insert(receipt.tx_id);
        ++outstanding_;
    }

    void record(TxId id)
    {
        const auto& tx = chain_.transaction(id);
        const auto& r = chain_.receipt(id);
        const auto& b = chain_.block(r.block_number);
        TxRecord rec;
        rec.phase = std::string(to_string(phase_));
        rec.batch_size = batch_;
        rec.round = round_;
        rec.tx_id = id.value;
        rec.function = std::string(to_string(*contracts::function_of(tx.call)));
        rec.submit_time_s = to_seconds(tx.submit_time);
        rec.confirm_time_s = to_seconds(b.timestamp);
        rec.latency_s = to_seconds(chain::latency_of(tx, chain_));
        rec.gas_used = r.gas_used;
        rec.gas_price_gwei = r.gas_price();
        rec.block_number = b.number;
        rec.block_size_kb = static_cast<double>(b.byte_size) / 1000.0;
        rec.block_tx_count = b.transactions.size();
        records_.push_back(std::move(rec));
    }

    const ExperimentPlan& plan_;
    Chain& chain_;
    Phase phase_;
    std::size_t batch_;
    std::size_t round_;
    std::vector<Submission> queue_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t slots_ = 0;
    std::size_t outstanding_ = 0;
    std::set<TxId> client_txs_;
    std::map<Address, std::uint64_t> nonces_;
    std::vector<TxRecord> records_;
    std::vector<EventRecord> events_;
};

std::string location_of(std::size_t provider, std::size_t service)
{
    return fmt::format("edge-{}-{}", provider, service);
}

std::uint64_t cost_of(std::size_t service) { return 10 * (service + 1); }

}  // namespace

std::string_view to_string(Phase phase)
{
    return phase == Phase::preliminary_agreement ? "preliminary_agreement" : "enforcement";
}

Phase phase_from_string(std::string_view name)
{
    if (name == "preliminary_agreement") return Phase::preliminary_agreement;
    if (name == "enforcement") return Phase::enforcement;
    throw Error(Errc::invalid_argument, fmt::format("unknown phase '{}'", name));
}

std::string_view to_string(FeePolicy::Mode mode) { return mode == FeePolicy::Mode::fixed ? "fixed" : "network_suggested"; }

void FeePolicy::validate() const
{
    if (!(suggested_tip_quantile >= 0.0 && suggested_tip_quantile <= 1.0))
        throw Error(Errc::invalid_argument, "suggested_tip_quantile must be in [0, 1]");
    if (!(fixed_tip >= 0.0) || !std::isfinite(fixed_tip)) throw Error(Errc::invalid_argument, "fixed_tip must be >= 0");
    if (!(max_fee_base_multiplier >= 1.0)) throw Error(Errc::invalid_argument, "max_fee_base_multiplier must be >= 1");
}

void ExperimentPlan::validate() const
{
    if (rounds < 1) throw Error(Errc::invalid_argument, "rounds must be >= 1");
    if (total_accounts < 2) throw Error(Errc::invalid_argument, "total_accounts must be >= 2");
    if (phases.empty()) throw Error(Errc::invalid_argument, "no phases selected");
    if (batch_sizes.empty()) throw Error(Errc::invalid_argument, "no batch sizes");
    const std::size_t providers = total_accounts / 2;
    for (auto b : batch_sizes) {
        if (b == 0 || b > total_accounts)
            throw Error(Errc::invalid_argument, fmt::format("batch size {} outside [1, {}]", b, total_accounts));
        if (b > providers)
            throw Error(Errc::invalid_argument, fmt::format("batch size {} exceeds the {} providers", b, providers));
    }
    if (services_per_provider == 0 || services_per_provider > contracts.max_services_per_provider)
        throw Error(Errc::invalid_argument, "services_per_provider must be in [1, max_services_per_provider]");
    if (breaches_per_provider < contracts.max_breach)
        throw Error(Errc::invalid_argument, "breaches_per_provider must reach max_breach");
    if (validators == 0 || validator_stake == 0) throw Error(Errc::invalid_argument, "need a staked validator set");
    chain.validate();
    fee_policy.validate();
}

std::vector<chain::Account> AccountSet::all() const
{
    std::vector<chain::Account> out;
    out.insert(out.end(), providers.begin(), providers.end());
    out.insert(out.end(), consumers.begin(), consumers.end());
    out.insert(out.end(), validators.begin(), validators.end());
    return out;
}

AccountSet provision_accounts(const ExperimentPlan& plan)
{
    AccountSet set;
    const std::size_t providers = plan.total_accounts / 2;
    for (std::size_t i = 0; i < plan.total_accounts; ++i) {
        const bool is_provider = i < providers;
        chain::Account a;
        a.role = is_provider ? contracts::Role::provider : contracts::Role::consumer;
        a.address = Address::derive(is_provider ? "provider" : "consumer", plan.seed, is_provider ? i : i - providers);
        a.balance = plan.account_funding;
        (is_provider ? set.providers : set.consumers).push_back(a);
    }
    for (std::size_t i = 0; i < plan.validators; ++i) {
        chain::Account a;
        a.role = contracts::Role::validator;
        a.address = Address::derive("validator", plan.seed, i);
        a.balance = plan.account_funding;
        a.stake = plan.validator_stake;
        set.validators.push_back(a);
    }
    return set;
}

std::uint64_t cell_seed(std::uint64_t seed, Phase phase, std::size_t batch_size, std::size_t round)
{
    return CounterRng::key(seed, to_string(phase), batch_size, round);
}

CellResult run_cell(const ExperimentPlan& plan, Phase phase, std::size_t batch_size, std::size_t round)
{
    const std::uint64_t seed = cell_seed(plan.seed, phase, batch_size, round);
    chain::ChainConfig cc = plan.chain;
    cc.rng_seed = seed;
    Chain chain(cc, plan.contracts);
    const auto accounts = provision_accounts(plan);
    for (const auto& a : accounts.all()) chain.add_account(a);

    for (std::uint64_t i = 0; i < plan.warmup_slots; ++i) chain.advance_slot();

    CellDriver driver(plan, chain, phase, batch_size, round);
    const Millis slot = cc.slot_duration();
    const auto& providers = accounts.providers;
    const auto& consumers = accounts.consumers;

    try {
        if (phase == Phase::preliminary_agreement) {
            Millis t0 = chain.now();
            for (std::size_t p = 0; p < batch_size; ++p) {
                const Millis at = t0 + jitter(seed, "jitter-provider", p, slot);
                for (std::size_t s = 0; s < plan.services_per_provider; ++s)
                    driver.schedule({at, 0, providers[p].address,
                                     contracts::AddServiceCall{s + 1, location_of(p, s), cost_of(s)},
                                     plan.marketplace_gas_limit});
            }
            driver.run_until_settled();

            t0 = chain.now();
            for (std::size_t c = 0; c < batch_size; ++c) {
                const std::size_t position = c % plan.services_per_provider + 1;
                driver.schedule({t0 + jitter(seed, "jitter-consumer", c, slot), 0, consumers[c].address,
                                 contracts::SelectServiceCall{providers[c % batch_size].address, position},
                                 plan.marketplace_gas_limit});
            }
            driver.run_until_settled();
        } else {
            // Agreements are synthesized directly; only enforcement traffic goes on chain.
            auto& world = chain.world();
            for (std::size_t p = 0; p < batch_size; ++p) {
                for (std::size_t s = 0; s < plan.services_per_provider; ++s)
                    world.add_service(providers[p].address, s + 1, location_of(p, s), cost_of(s));
                world.select_service(consumers[p].address, providers[p].address, p % plan.services_per_provider + 1);
            }
            std::map<Address, Address> consumer_of;
            std::map<Address, std::size_t> index_of;
            for (std::size_t p = 0; p < batch_size; ++p) {
                consumer_of[providers[p].address] = consumers[p].address;
                index_of[providers[p].address] = p;
            }

            const Millis t0 = chain.now();
            for (std::size_t p = 0; p < batch_size; ++p) {
                const Millis at = t0 + jitter(seed, "jitter-provider", p, slot);
                for (std::size_t k = 0; k < plan.breaches_per_provider; ++k) {
                    // Availability KPI: the oracle reports a value under the agreed floor.
                    CounterRng rng(seed, "kpi", p, k);
                    const contracts::KpiReport report{providers[p].address, "availability",
                                                      0.90 + 0.08 * rng.uniform01(), 0.99,
                                                      contracts::KpiReport::Direction::must_exceed};
                    const auto breach = contracts::fetch_oracle_report(report);
                    if (!breach) continue;
                    driver.schedule({at, 0, breach->provider, contracts::RegisterBreachCall{breach->num_breaches},
                                     plan.enforcement_gas_limit});
                }
            }
            driver.on_trigger = [&](const Address& provider, Millis block_time) {
                const std::size_t p = index_of.at(provider);
                driver.schedule({block_time + jitter(seed, "jitter-penalty", p, slot), 0, consumer_of.at(provider),
                                 contracts::CalculatePenaltyCall{provider}, plan.enforcement_gas_limit});
            };
            driver.run_until_settled();
        }
    } catch (const Error& e) {
        if (e.code() == Errc::simulation_failure) throw;
        throw Error(Errc::simulation_failure,
                    fmt::format("{} batch {} round {}: {}", to_string(phase), batch_size, round, e.what()));
    }
    return driver.finish();
}

namespace {

void append(ExperimentResult& into, CellResult&& cell)
{
    std::move(cell.records.begin(), cell.records.end(), std::back_inserter(into.records));
    std::move(cell.blocks.begin(), cell.blocks.end(), std::back_inserter(into.blocks));
    std::move(cell.events.begin(), cell.events.end(), std::back_inserter(into.events));
    into.end_time_s = std::max(into.end_time_s, cell.end_time_s);
}

ExperimentResult run_phase(const ExperimentPlan& plan, Phase phase)
{
    ExperimentResult out;
    for (auto b : plan.batch_sizes)
        for (std::size_t r = 1; r <= plan.rounds; ++r) append(out, run_cell(plan, phase, b, r));
    return out;
}

}  // namespace

std::vector<TxRecord> run_phase1(const ExperimentPlan& plan)
{
    plan.validate();
    return run_phase(plan, Phase::preliminary_agreement).records;
}

std::vector<TxRecord> run_phase2(const ExperimentPlan& plan)
{
    plan.validate();
    return run_phase(plan, Phase::enforcement).records;
}

ExperimentResult run_experiment(const ExperimentPlan& plan)
{
    plan.validate();
    ExperimentResult out;
    for (auto phase : plan.phases) {
        auto part = run_phase(plan, phase);
        append(out, CellResult{std::move(part.records), std::move(part.blocks), std::move(part.events), part.end_time_s});
    }
    return out;
}

std::size_t expected_record_count(const ExperimentPlan& plan, Phase phase)
{
    const std::size_t per = phase == Phase::preliminary_agreement ? plan.services_per_provider + 1
                                                                  : plan.breaches_per_provider + 1;
    const std::size_t sum = std::accumulate(plan.batch_sizes.begin(), plan.batch_sizes.end(), std::size_t{0});
    return plan.rounds * per * sum;
}

Moments moments(const std::vector<double>& values)
{
    if (values.empty()) throw Error(Errc::empty_group, "moments of an empty group");
    Moments m;
    const double n = static_cast<double>(values.size());
    m.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - m.mean) * (v - m.mean);
        m.stddev = std::sqrt(ss / (n - 1.0));
    }
    return m;
}

std::vector<BatchSummary> summarize_by_batch(const std::vector<TxRecord>& records)
{
    if (records.empty()) throw Error(Errc::empty_group, "no records to summarize");
    std::map<std::pair<std::string, std::size_t>, std::vector<const TxRecord*>> groups;
    for (const auto& r : records) groups[{r.function, r.batch_size}].push_back(&r);

    std::vector<BatchSummary> out;
    for (const auto& [key, rows] : groups) {
        std::vector<double> tx_count, size, price, latency;
        for (const auto* r : rows) {
            tx_count.push_back(static_cast<double>(r->block_tx_count));
            size.push_back(r->block_size_kb);
            price.push_back(r->gas_price_gwei);
            latency.push_back(r->latency_s);
        }
        BatchSummary s;
        s.function = key.first;
        s.batch_size = key.second;
        s.n = rows.size();
        s.single = rows.size() == 1;
        s.tx_count = moments(tx_count);
        s.block_size_kb = moments(size);
        s.gas_price_gwei = moments(price);
        s.latency_s = moments(latency);
        out.push_back(s);
    }
    return out;
}

}  // namespace inpsim::workload
