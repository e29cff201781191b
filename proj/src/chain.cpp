#include "inpsim/chain.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

namespace inpsim::chain {

namespace {

constexpr Gwei kBackgroundFunding = 1e15;

bool finite_non_negative(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

std::string_view to_string(TxStatus status)
{
    switch (status) {
    case TxStatus::submitted: return "submitted";
    case TxStatus::pending: return "pending";
    case TxStatus::included: return "included";
    case TxStatus::finalized: return "finalized";
    case TxStatus::dropped: return "dropped";
    }
    return "unknown";
}

std::string_view to_string(SimEvent::Kind kind)
{
    switch (kind) {
    case SimEvent::Kind::block_appended: return "block_appended";
    case SimEvent::Kind::tx_included: return "tx_included";
    case SimEvent::Kind::tx_reverted: return "tx_reverted";
    case SimEvent::Kind::tx_finalized: return "tx_finalized";
    case SimEvent::Kind::tx_dropped: return "tx_dropped";
    case SimEvent::Kind::contract_event: return "contract_event";
    case SimEvent::Kind::penalty_trigger: return "penalty_trigger";
    }
    return "unknown";
}

void BackgroundModel::validate() const
{
    if (!finite_non_negative(arrival_rate)) throw Error(Errc::invalid_argument, "arrival_rate must be finite and >= 0");
    gas_usage.validate();
    tip.validate();
    fee_cap.validate();
    payload_bytes.validate();
}

void RelayModel::validate() const
{
    if (service_time.count() < 0) throw Error(Errc::invalid_argument, "relay service time must be >= 0");
    propagation_s.validate();
}

void ChainConfig::validate() const
{
    if (slot_duration_s <= 0) throw Error(Errc::invalid_argument, "slot_duration must be positive");
    if (block_gas_target == 0 || block_gas_target > block_gas_limit)
        throw Error(Errc::invalid_argument, "block_gas_target must be in (0, block_gas_limit]");
    if (!(base_fee_initial > 0.0) || !std::isfinite(base_fee_initial))
        throw Error(Errc::invalid_argument, "base_fee_initial must be positive");
    if (!(base_fee_max_change_fraction >= 0.0 && base_fee_max_change_fraction <= 1.0))
        throw Error(Errc::invalid_argument, "base_fee_max_change_fraction must be in [0, 1]");
    background.validate();
    relay.validate();
}

Gwei effective_tip(const Transaction& tx, Gwei base_fee) { return std::min(tx.priority_fee, tx.max_fee - base_fee); }

std::size_t transaction_bytes(const Transaction& tx, const ChainConfig& config)
{
    return config.tx_overhead_bytes + tx.payload_bytes;
}

Address select_proposer(std::span<const Account> validators, std::uint64_t slot, std::uint64_t seed)
{
    std::uint64_t total = 0;
    for (const auto& v : validators) total += v.stake;
    if (total == 0) throw Error(Errc::no_validators, fmt::format("slot {}", slot));

    CounterRng rng(seed, "proposer", slot);
    std::uniform_int_distribution<std::uint64_t> pick(0, total - 1);
    std::uint64_t r = pick(rng);
    for (const auto& v : validators) {
        if (r < v.stake) return v.address;
        r -= v.stake;
    }
    return validators.back().address;
}

Gwei update_base_fee(const Block& prev, const ChainConfig& config)
{
    const double target = static_cast<double>(config.block_gas_target);
    const double deviation = (static_cast<double>(prev.gas_used) - target) / target;
    const Gwei next = prev.base_fee * (1.0 + config.base_fee_max_change_fraction * deviation);
    return std::max(next, kOneWeiInGwei);
}

std::vector<Transaction> inject_background_traffic(const BackgroundModel& model, std::uint64_t slot, std::uint64_t seed,
                                                   Millis slot_duration)
{
    std::vector<Transaction> out;
    if (model.arrival_rate <= 0.0 || slot == 0) return out;

    CounterRng count_rng(seed, "background-count", slot);
    std::poisson_distribution<std::uint64_t> arrivals(model.arrival_rate);
    const std::uint64_t n = arrivals(count_rng);
    out.reserve(n);

    const Millis slot_start = slot_duration * static_cast<std::int64_t>(slot - 1);
    for (std::uint64_t i = 0; i < n; ++i) {
        CounterRng rng(seed, "background-tx", slot, i);
        Transaction tx;
        tx.sender = Address::derive(fmt::format("background/{}", slot), seed, i);
        tx.nonce = 0;
        const auto gas = static_cast<Gas>(std::llround(std::max(21'000.0, model.gas_usage.sample(rng))));
        tx.call = contracts::OpaqueCall{gas};
        tx.gas_limit = gas;
        tx.priority_fee = model.tip.sample(rng);
        tx.max_fee = std::max(model.fee_cap.sample(rng), tx.priority_fee);
        tx.payload_bytes = static_cast<std::size_t>(std::llround(model.payload_bytes.sample(rng)));
        tx.submit_time = slot_start + Millis{static_cast<std::int64_t>(rng.uniform01() * slot_duration.count())};
        tx.visible_time = tx.submit_time;
        tx.background = true;
        out.push_back(std::move(tx));
    }
    return out;
}

Block build_block(std::span<const Transaction* const> mempool, const Block& prev, Gwei base_fee, Address proposer,
                  const ChainConfig& config, const Executor& execute)
{
    Block block;
    block.number = prev.number + 1;
    block.timestamp = config.slot_duration() * static_cast<std::int64_t>(block.number);
    block.proposer = proposer;
    block.base_fee = base_fee;
    block.byte_size = config.header_bytes;

    // Per-sender nonce queues.
    std::map<Address, std::vector<const Transaction*>> by_sender;
    for (const auto* tx : mempool) by_sender[tx->sender].push_back(tx);
    for (auto& [_, queue] : by_sender)
        std::sort(queue.begin(), queue.end(), [](const auto* a, const auto* b) { return a->nonce < b->nonce; });

    struct Candidate {
        const Transaction* tx;
        Gwei tip;
        std::size_t index;  // position in its sender queue
        const std::vector<const Transaction*>* queue;
    };
    const auto worse = [](const Candidate& a, const Candidate& b) {
        if (a.tip != b.tip) return a.tip < b.tip;
        if (a.tx->submit_time != b.tx->submit_time) return a.tx->submit_time > b.tx->submit_time;
        return a.tx->tx_id > b.tx->tx_id;
    };
    std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse)> heap(worse);

    const auto offer = [&](const std::vector<const Transaction*>& queue, std::size_t index) {
        if (index >= queue.size()) return;
        const auto* tx = queue[index];
        if (tx->visible_time > block.timestamp || tx->max_fee < base_fee) return;
        heap.push(Candidate{tx, effective_tip(*tx, base_fee), index, &queue});
    };
    for (const auto& [_, queue] : by_sender) offer(queue, 0);

    while (!heap.empty()) {
        const auto c = heap.top();
        heap.pop();
        const std::size_t bytes = transaction_bytes(*c.tx, config);
        if (c.tx->gas_limit > config.block_gas_limit - block.gas_used) continue;
        if (bytes > config.block_byte_limit - std::min(block.byte_size, config.block_byte_limit)) continue;
        const Gas used = execute(*c.tx);
        block.gas_used += used;
        block.byte_size += bytes;
        block.transactions.push_back(c.tx->tx_id);
        offer(*c.queue, c.index + 1);
    }
    return block;
}

Chain::Chain(ChainConfig config, contracts::ContractsConfig contracts)
    : config_(std::move(config)), world_(std::move(contracts))
{
    config_.validate();
    Block genesis;
    genesis.base_fee = config_.base_fee_initial;
    genesis.byte_size = config_.header_bytes;
    blocks_.push_back(std::move(genesis));
}

void Chain::add_account(Account account)
{
    if (account.role == Role::validator && account.stake == 0)
        throw Error(Errc::invalid_argument, "validators need a positive stake");
    world_.register_actor(account.address, account.role);
    accounts_[account.address] = account;
}

const Account& Chain::account(const Address& who) const
{
    auto it = accounts_.find(who);
    if (it == accounts_.end()) throw Error(Errc::unknown_sender, who.hex());
    return it->second;
}

bool Chain::has_account(const Address& who) const { return accounts_.contains(who); }

std::vector<Account> Chain::validators() const
{
    std::vector<Account> out;
    for (const auto& [_, a] : accounts_)
        if (a.role == Role::validator && a.stake > 0) out.push_back(a);
    return out;
}

SubmitReceipt Chain::submit_transaction(Transaction tx)
{
    const auto it = accounts_.find(tx.sender);
    if (it == accounts_.end()) throw Error(Errc::unknown_sender, tx.sender.hex());
    const std::uint64_t expected = next_submit_nonce_[tx.sender];
    if (tx.nonce != expected)
        throw Error(Errc::nonce_gap, fmt::format("{} nonce {} but next is {}", tx.sender.hex(), tx.nonce, expected));
    if (tx.gas_limit < 21'000) throw Error(Errc::invalid_argument, "gas_limit below 21000");
    if (tx.priority_fee < 0.0 || tx.priority_fee > tx.max_fee)
        throw Error(Errc::invalid_argument, "priority_fee must be in [0, max_fee]");
    if (it->second.balance < tx.max_fee * static_cast<double>(tx.gas_limit))
        throw Error(Errc::insufficient_balance, tx.sender.hex());

    tx.submit_time = clock_;
    tx.background = false;
    if (contracts::function_of(tx.call)) tx.payload_bytes = contracts::calldata_bytes(tx.call);
    const Millis ready = std::max(clock_, relay_free_) + config_.relay.service_time;
    relay_free_ = ready;
    // Transactions a sender hands over at the same instant travel together.
    std::uint64_t sender_key = 0;
    for (std::size_t i = 0; i < 8; ++i) sender_key = (sender_key << 8) | tx.sender.bytes[i];
    CounterRng rng(config_.rng_seed, "relay", static_cast<std::uint64_t>(clock_.count()), sender_key);
    const double delay_s = config_.relay.propagation_s.sample(rng);
    tx.visible_time = ready + Millis{static_cast<std::int64_t>(std::llround(delay_s * 1000.0))};

    const Millis submitted = tx.submit_time;
    const TxId id = admit(std::move(tx));
    return SubmitReceipt{id, submitted};
}

TxId Chain::admit(Transaction tx)
{
    tx.tx_id = TxId{next_tx_id_++};
    tx.status = TxStatus::pending;
    ++next_submit_nonce_[tx.sender];
    pending_.insert(tx.tx_id);
    const TxId id = tx.tx_id;
    txs_.emplace(id, std::move(tx));
    return id;
}

void Chain::advance_clock(Millis t)
{
    if (t < clock_) throw Error(Errc::invalid_argument, "clock cannot move backwards");
    if (t > next_block_time()) throw Error(Errc::invalid_argument, "clock cannot pass the next block time");
    clock_ = t;
}

Millis Chain::next_block_time() const
{
    return config_.slot_duration() * static_cast<std::int64_t>(head().number + 1);
}

Gwei Chain::next_base_fee() const
{
    if (head().number == 0) return config_.base_fee_initial;
    return update_base_fee(head(), config_);
}

Gas Chain::execute(const Transaction& tx, std::uint64_t block_number, Gwei base_fee)
{
    ExecutionReceipt r;
    r.tx_id = tx.tx_id;
    r.block_number = block_number;
    r.base_fee = base_fee;
    r.effective_tip = effective_tip(tx, base_fee);

    if (const auto* opaque = std::get_if<contracts::OpaqueCall>(&tx.call)) {
        r.gas_used = opaque->gas;
    } else {
        try {
            auto result = world_.execute(tx.sender, tx.call, block_number, tx.tx_id, tx.gas_limit);
            r.gas_used = result.receipt.total;
            const auto& ev = result.event;
            std::string detail{contracts::to_string(ev.kind)};
            for (const auto& a : ev.args) detail += " " + a;
            exec_events_.push_back({SimEvent::Kind::contract_event, block_number, tx.tx_id, std::move(detail)});
            if (result.trigger) {
                exec_events_.push_back({SimEvent::Kind::penalty_trigger, block_number, tx.tx_id,
                                        "provider=" + result.trigger->provider.hex()});
            }
            r.call = std::move(result);
        } catch (const Error& e) {
            // Reverted calls are still included; out-of-gas burns the whole limit.
            r.reverted = true;
            r.error = e.what();
            r.gas_used = e.code() == Errc::out_of_gas ? tx.gas_limit : std::min<Gas>(tx.gas_limit, 21'000);
        }
    }

    auto& sender = accounts_.at(tx.sender);
    sender.balance -= static_cast<double>(r.gas_used) * r.gas_price();
    ++sender.nonce;

    receipts_[tx.tx_id] = std::move(r);
    return receipts_[tx.tx_id].gas_used;
}

std::vector<SimEvent> Chain::advance_slot()
{
    const std::uint64_t number = head().number + 1;
    std::vector<SimEvent> events;

    for (auto& tx : inject_background_traffic(config_.background, number, config_.rng_seed, config_.slot_duration())) {
        if (!accounts_.contains(tx.sender)) {
            accounts_[tx.sender] = Account{tx.sender, kBackgroundFunding, 0, 0, Role::background};
        }
        const TxId id = admit(std::move(tx));
        background_entry_slot_[id] = number;
    }

    for (auto it = background_entry_slot_.begin(); it != background_entry_slot_.end();) {
        if (number - it->second > config_.background.ttl_slots) {
            pending_.erase(it->first);
            txs_.at(it->first).status = TxStatus::dropped;
            events.push_back({SimEvent::Kind::tx_dropped, number, it->first, {}});
            it = background_entry_slot_.erase(it);
        } else {
            ++it;
        }
    }

    const auto vals = validators();
    const Address proposer = select_proposer(vals, number, config_.rng_seed);
    const Gwei base_fee = next_base_fee();

    std::vector<const Transaction*> pool;
    pool.reserve(pending_.size());
    for (const auto id : pending_) pool.push_back(&txs_.at(id));

    exec_events_.clear();
    Block block = build_block(pool, head(), base_fee, proposer, config_,
                              [&](const Transaction& tx) { return execute(tx, number, base_fee); });

    events.push_back({SimEvent::Kind::block_appended, number, {},
                      fmt::format("txs={} gas_used={} bytes={}", block.transactions.size(), block.gas_used,
                                  block.byte_size)});
    Gwei tips = 0.0;
    for (const auto id : block.transactions) {
        auto& tx = txs_.at(id);
        tx.status = TxStatus::included;
        tx.block_number = number;
        pending_.erase(id);
        background_entry_slot_.erase(id);
        const auto& r = receipts_.at(id);
        tips += static_cast<double>(r.gas_used) * r.effective_tip;
        events.push_back({r.reverted ? SimEvent::Kind::tx_reverted : SimEvent::Kind::tx_included, number, id, r.error});
    }
    accounts_.at(proposer).balance += tips;
    for (auto& e : exec_events_) events.push_back(std::move(e));
    exec_events_.clear();

    clock_ = block.timestamp;
    blocks_.push_back(std::move(block));

    while (finalized_height_ + config_.finality_depth < number) {
        const std::uint64_t h = finalized_height_ + 1;
        for (const auto id : blocks_[h].transactions) {
            txs_.at(id).status = TxStatus::finalized;
            events.push_back({SimEvent::Kind::tx_finalized, number, id, {}});
        }
        finalized_height_ = h;
    }
    return events;
}

const Block& Chain::block(std::uint64_t number) const
{
    if (number >= blocks_.size()) throw Error(Errc::invalid_argument, fmt::format("no block {}", number));
    return blocks_[number];
}

const Transaction& Chain::transaction(TxId id) const
{
    auto it = txs_.find(id);
    if (it == txs_.end()) throw Error(Errc::unknown_transaction, fmt::format("tx {}", id.value));
    return it->second;
}

const ExecutionReceipt& Chain::receipt(TxId id) const
{
    auto it = receipts_.find(id);
    if (it == receipts_.end()) throw Error(Errc::not_yet_included, fmt::format("tx {}", id.value));
    return it->second;
}

std::vector<TxId> Chain::mempool() const { return {pending_.begin(), pending_.end()}; }

std::vector<Gwei> Chain::recent_tips(std::size_t depth) const
{
    std::vector<Gwei> out;
    const std::size_t last = blocks_.size() - 1;
    const std::size_t first = last >= depth ? last - depth + 1 : 1;
    for (std::size_t n = first; n <= last && n >= 1; ++n)
        for (const auto id : blocks_[n].transactions) out.push_back(receipts_.at(id).effective_tip);
    return out;
}

Millis latency_of(const Transaction& tx, const Chain& chain)
{
    if ((tx.status != TxStatus::included && tx.status != TxStatus::finalized) || !tx.block_number)
        throw Error(Errc::not_yet_included, fmt::format("tx {} is {}", tx.tx_id.value, to_string(tx.status)));
    return chain.block(*tx.block_number).timestamp - tx.submit_time;
}

}  // namespace inpsim::chain
