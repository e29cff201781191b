#pragma once

#include "inpsim/contracts.hpp"
#include "inpsim/core.hpp"
#include "inpsim/rng.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

namespace inpsim::chain {

using contracts::Role;

// Ambient traffic from other users of the chain. Every background
// transaction comes from a fresh synthetic account and carries an absolute
// fee cap, so demand responds to the base fee.
struct BackgroundModel {
    double arrival_rate = 0.0;  // Poisson mean, transactions per slot
    Distribution gas_usage = Distribution::uniform(21'000, 200'000);
    Distribution tip = Distribution::lognormal(0.4, 0.6);       // Gwei per gas
    Distribution fee_cap = Distribution::lognormal(3.0, 0.5);   // Gwei per gas
    Distribution payload_bytes = Distribution::lognormal(6.9, 0.8);
    std::uint64_t ttl_slots = 3;  // pending background txs are dropped after this many slots

    void validate() const;
    bool operator==(const BackgroundModel&) const = default;
};

// Ingestion path of client transactions through the node service: a FIFO
// server with a fixed per-transaction service time, then a propagation delay
// before the transaction is visible to block proposers. The delay is drawn
// once per (sender, submit instant), so a burst propagates together.
struct RelayModel {
    Millis service_time{0};
    Distribution propagation_s = Distribution::constant(0.0);

    void validate() const;
    bool operator==(const RelayModel&) const = default;
};

struct ChainConfig {
    std::int64_t slot_duration_s = 12;
    Gas block_gas_limit = 30'000'000;
    Gas block_gas_target = 15'000'000;
    std::size_t block_byte_limit = 2'000'000;
    std::size_t header_bytes = 540;
    std::size_t tx_overhead_bytes = 110;
    Gwei base_fee_initial = 10.0;
    double base_fee_max_change_fraction = 0.125;
    std::uint64_t finality_depth = 1;
    std::uint64_t rng_seed = 0;
    BackgroundModel background;
    RelayModel relay;

    void validate() const;
    [[nodiscard]] Millis slot_duration() const { return Millis{slot_duration_s * 1000}; }
    bool operator==(const ChainConfig&) const = default;
};

struct Account {
    Address address;
    Gwei balance = 0.0;
    std::uint64_t nonce = 0;  // transactions included so far
    std::uint64_t stake = 0;  // Gwei, validators only
    Role role = Role::background;
};

enum class TxStatus { submitted, pending, included, finalized, dropped };

std::string_view to_string(TxStatus status);

struct Transaction {
    TxId tx_id;
    Address sender;
    std::uint64_t nonce = 0;
    contracts::ContractCall call = contracts::OpaqueCall{};
    Gas gas_limit = 21'000;
    Gwei max_fee = 0.0;
    Gwei priority_fee = 0.0;
    Millis submit_time{0};
    Millis visible_time{0};  // when proposers can see it
    std::size_t payload_bytes = 0;
    TxStatus status = TxStatus::submitted;
    std::optional<std::uint64_t> block_number;
    bool background = false;
};

struct Block {
    std::uint64_t number = 0;
    Millis timestamp{0};
    Address proposer;
    std::vector<TxId> transactions;
    Gas gas_used = 0;
    std::size_t byte_size = 0;
    Gwei base_fee = 0.0;
};

struct ExecutionReceipt {
    TxId tx_id;
    std::uint64_t block_number = 0;
    Gas gas_used = 0;
    Gwei base_fee = 0.0;
    Gwei effective_tip = 0.0;
    bool reverted = false;
    std::string error;
    std::optional<contracts::CallResult> call;

    [[nodiscard]] Gwei gas_price() const { return base_fee + effective_tip; }
};

struct SubmitReceipt {
    TxId tx_id;
    Millis submit_time{0};
};

struct SimEvent {
    enum class Kind { block_appended, tx_included, tx_reverted, tx_finalized, tx_dropped, contract_event, penalty_trigger };

    Kind kind = Kind::block_appended;
    std::uint64_t block_number = 0;
    TxId tx_id;
    std::string detail;
};

std::string_view to_string(SimEvent::Kind kind);

// min(priority_fee, max_fee - base_fee); negative when the tx cannot pay the base fee.
Gwei effective_tip(const Transaction& tx, Gwei base_fee);

std::size_t transaction_bytes(const Transaction& tx, const ChainConfig& config);

// Stake-weighted draw; deterministic in (slot, seed).
Address select_proposer(std::span<const Account> validators, std::uint64_t slot, std::uint64_t seed);

// EIP-1559 update: base * (1 + f * (used - target) / target), floored at one wei.
Gwei update_base_fee(const Block& prev, const ChainConfig& config);

// Poisson(arrival_rate) transactions for `slot`, submitted during the slot
// interval preceding block `slot`. tx_id is left unset.
std::vector<Transaction> inject_background_traffic(const BackgroundModel& model, std::uint64_t slot, std::uint64_t seed,
                                                   Millis slot_duration);

// Runs one included transaction and returns the gas it used.
using Executor = std::function<Gas(const Transaction&)>;

// Candidates are the pending transactions visible at the block timestamp that
// can pay `base_fee`, each sender's lowest nonce first. They are taken by
// effective tip (descending), then submit time, then tx_id; a candidate whose
// gas limit or size no longer fits is skipped along with its sender's later
// nonces, and smaller candidates behind it may still be packed.
Block build_block(std::span<const Transaction* const> mempool, const Block& prev, Gwei base_fee, Address proposer,
                  const ChainConfig& config, const Executor& execute);

class Chain {
  public:
    explicit Chain(ChainConfig config, contracts::ContractsConfig contracts = {});

    void add_account(Account account);
    [[nodiscard]] const Account& account(const Address& who) const;
    [[nodiscard]] bool has_account(const Address& who) const;
    [[nodiscard]] std::vector<Account> validators() const;

    // Client submission at the current clock. The tx's sender, nonce, call,
    // gas limit and fee fields are used; id, times and status are assigned.
    SubmitReceipt submit_transaction(Transaction tx);

    // Moves the clock forward, never past the next block's timestamp.
    void advance_clock(Millis t);
    [[nodiscard]] Millis now() const { return clock_; }
    [[nodiscard]] Millis next_block_time() const;

    std::vector<SimEvent> advance_slot();

    [[nodiscard]] const Block& head() const { return blocks_.back(); }
    [[nodiscard]] const std::vector<Block>& blocks() const { return blocks_; }
    [[nodiscard]] const Block& block(std::uint64_t number) const;
    [[nodiscard]] const Transaction& transaction(TxId id) const;
    // Throws not_yet_included while the tx is pending.
    [[nodiscard]] const ExecutionReceipt& receipt(TxId id) const;
    // Pending transactions in submission order.
    [[nodiscard]] std::vector<TxId> mempool() const;
    [[nodiscard]] Gwei next_base_fee() const;
    // Effective tips of all transactions in the last `depth` blocks.
    [[nodiscard]] std::vector<Gwei> recent_tips(std::size_t depth) const;

    [[nodiscard]] const contracts::ContractWorld& world() const { return world_; }
    contracts::ContractWorld& world() { return world_; }
    [[nodiscard]] const ChainConfig& config() const { return config_; }

  private:
    TxId admit(Transaction tx);
    Gas execute(const Transaction& tx, std::uint64_t block_number, Gwei base_fee);

    ChainConfig config_;
    contracts::ContractWorld world_;
    Millis clock_{0};
    Millis relay_free_{0};
    std::uint64_t next_tx_id_ = 1;
    std::uint64_t finalized_height_ = 0;
    std::map<Address, Account> accounts_;
    std::map<Address, std::uint64_t> next_submit_nonce_;
    std::unordered_map<TxId, Transaction> txs_;
    std::unordered_map<TxId, ExecutionReceipt> receipts_;
    std::set<TxId> pending_;
    std::map<TxId, std::uint64_t> background_entry_slot_;
    std::vector<Block> blocks_;
    std::vector<SimEvent> exec_events_;
};

Millis latency_of(const Transaction& tx, const Chain& chain);

}  // namespace inpsim::chain
