#pragma once

#include "inpsim/chain.hpp"
#include "inpsim/contracts.hpp"
#include "inpsim/core.hpp"

#include <string>
#include <vector>

namespace inpsim::workload {

enum class Phase { preliminary_agreement, enforcement };

std::string_view to_string(Phase phase);
Phase phase_from_string(std::string_view name);

struct FeePolicy {
    enum class Mode { network_suggested, fixed };

    Mode mode = Mode::network_suggested;
    double suggested_tip_quantile = 0.5;
    Gwei fixed_tip = 1.5;           // also the fallback when no tips are observable
    std::size_t lookback_blocks = 10;
    double max_fee_base_multiplier = 2.0;  // max_fee = multiplier * base + tip

    void validate() const;
    bool operator==(const FeePolicy&) const = default;
};

std::string_view to_string(FeePolicy::Mode mode);

struct ExperimentPlan {
    std::vector<Phase> phases{Phase::preliminary_agreement, Phase::enforcement};
    std::vector<std::size_t> batch_sizes{2, 10, 18, 26, 34, 42, 50};
    std::size_t rounds = 10;
    std::size_t total_accounts = 100;
    std::size_t services_per_provider = 5;
    std::size_t breaches_per_provider = 3;
    std::size_t validators = 16;
    std::uint64_t validator_stake = 32'000'000'000;  // Gwei
    Gwei account_funding = 1e15;
    std::uint64_t warmup_slots = 8;
    std::uint64_t max_slots_per_cell = 400;
    Gas marketplace_gas_limit = 200'000;  // add_service, select_service
    Gas enforcement_gas_limit = 60'000;   // register_breach, calculate_penalty
    std::uint64_t seed = 0;
    chain::ChainConfig chain;
    contracts::ContractsConfig contracts;
    FeePolicy fee_policy;

    void validate() const;
};

struct TxRecord {
    std::string phase;
    std::size_t batch_size = 0;
    std::size_t round = 0;
    std::uint64_t tx_id = 0;
    std::string function;
    double submit_time_s = 0.0;
    double confirm_time_s = 0.0;
    double latency_s = 0.0;
    Gas gas_used = 0;
    Gwei gas_price_gwei = 0.0;
    std::uint64_t block_number = 0;
    double block_size_kb = 0.0;
    std::size_t block_tx_count = 0;

    bool operator==(const TxRecord&) const = default;
};

struct BlockRecord {
    std::string phase;
    std::size_t batch_size = 0;
    std::size_t round = 0;
    std::uint64_t block_number = 0;
    double timestamp_s = 0.0;
    std::string proposer;
    std::size_t tx_count = 0;
    Gas gas_used = 0;
    std::size_t byte_size = 0;
    Gwei base_fee = 0.0;
};

struct EventRecord {
    std::string phase;
    std::size_t batch_size = 0;
    std::size_t round = 0;
    std::uint64_t block_number = 0;
    std::uint64_t tx_id = 0;
    std::string kind;
    std::string detail;
};

struct RunManifest {
    std::uint64_t seed = 0;
    std::string config_digest;
    std::string code_version;
    double start_time_s = 0.0;
    double end_time_s = 0.0;  // longest simulated cell
    std::string records_digest;
};

struct CellResult {
    std::vector<TxRecord> records;
    std::vector<BlockRecord> blocks;
    std::vector<EventRecord> events;
    double end_time_s = 0.0;
};

struct ExperimentResult {
    std::vector<TxRecord> records;
    std::vector<BlockRecord> blocks;
    std::vector<EventRecord> events;
    double end_time_s = 0.0;
};

struct AccountSet {
    std::vector<chain::Account> providers;
    std::vector<chain::Account> consumers;
    std::vector<chain::Account> validators;

    [[nodiscard]] std::vector<chain::Account> all() const;
};

// Providers get floor(total / 2), consumers the rest. Background senders are
// synthesized by the chain per transaction.
AccountSet provision_accounts(const ExperimentPlan& plan);

// Seed of one (phase, batch, round) cell.
std::uint64_t cell_seed(std::uint64_t seed, Phase phase, std::size_t batch_size, std::size_t round);

CellResult run_cell(const ExperimentPlan& plan, Phase phase, std::size_t batch_size, std::size_t round);

std::vector<TxRecord> run_phase1(const ExperimentPlan& plan);
std::vector<TxRecord> run_phase2(const ExperimentPlan& plan);

// All configured phases, merged by (phase, batch, round, tx_id).
ExperimentResult run_experiment(const ExperimentPlan& plan);

// Records the plan must produce: rounds * sum_b (services + 1) * b for phase
// one and rounds * sum_b (breaches + 1) * b for phase two.
std::size_t expected_record_count(const ExperimentPlan& plan, Phase phase);

struct Moments {
    double mean = 0.0;
    double stddev = 0.0;  // n - 1 denominator; 0 when n == 1
};

struct BatchSummary {
    std::string function;
    std::size_t batch_size = 0;
    std::size_t n = 0;
    bool single = false;
    Moments tx_count;
    Moments block_size_kb;
    Moments gas_price_gwei;
    Moments latency_s;
};

Moments moments(const std::vector<double>& values);

// One row per (function, batch_size) present, sorted by function then batch.
std::vector<BatchSummary> summarize_by_batch(const std::vector<TxRecord>& records);

}  // namespace inpsim::workload
