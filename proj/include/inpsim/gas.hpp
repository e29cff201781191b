#pragma once

#include "inpsim/core.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace inpsim::contracts {

enum class Function { add_service, select_service, register_breach, calculate_penalty };

std::string_view to_string(Function fn);

enum class OpKind {
    cold_sload,     // first read of an actor slot, or any cross-contract read
    warm_sload,     // read of an actor slot already touched in its lifetime
    sstore_init,    // zero -> nonzero write
    sstore_update,  // nonzero -> nonzero write
    log_base,
    log_topic,
    log_byte,
    memory_word,
    position_step,  // one extra list position walked by select_service
    execution,      // fixed opcode overhead of a function body, in execution units
};

std::string_view to_string(OpKind kind);

struct MicroOp {
    OpKind kind;
    std::uint64_t count;

    bool operator==(const MicroOp&) const = default;
};

struct GasSchedule {
    Gas tx_base = 21'000;
    Gas cold_sload = 2'200;
    Gas warm_sload = 100;
    Gas sstore_init = 17'900;
    Gas sstore_update = 2'900;
    Gas log_base = 375;
    Gas log_per_topic = 375;
    Gas log_per_byte = 8;
    Gas memory_expansion_unit = 3;
    Gas position_step = 140;
    Gas execution_unit = 1;

    // Throws Error(unknown_op_kind) for values outside OpKind.
    [[nodiscard]] Gas price(OpKind kind) const;

    bool operator==(const GasSchedule&) const = default;
};

// The calibrated schedule reproducing the published per-call totals.
GasSchedule default_schedule();

// total = tx_base + sum(count * unit price).
Gas price_receipt(std::span<const MicroOp> micro_ops, const GasSchedule& schedule);

struct GasReceipt {
    Function function = Function::add_service;
    std::vector<MicroOp> micro_ops;
    Gas total = 0;
    bool cold_path = false;
    int position = 0;  // list position for select_service, 0 otherwise

    bool operator==(const GasReceipt&) const = default;
};

// One published cell of the gas table.
struct PublishedGas {
    Function function;
    bool cold_path;
    int position;
    Gas total;
    std::string_view label;
};

std::span<const PublishedGas> published_gas_table();
std::optional<Gas> published_total(Function fn, bool cold_path, int position);

// Micro-op traces of each contract function body. The structural ops follow
// the storage layout; the execution count is the per-function opcode overhead.
std::vector<MicroOp> trace_add_service(bool first_service);
std::vector<MicroOp> trace_select_service(bool first_selection, int position);
std::vector<MicroOp> trace_register_breach(bool cold_read, bool init_write);
std::vector<MicroOp> trace_calculate_penalty(bool init_write);

// Calibration of the default schedule from the published table.
// tx_base, warm_sload, sstore_update, the log prices, memory and execution
// unit prices are pinned from `pinned`; cold_sload, sstore_init and
// position_step are solved from the cold/warm and position deltas of the
// traces. Execution counts per function are then the residual of the warm
// totals. Throws Error(gas_mismatch) if the overdetermined deltas disagree.
struct Calibration {
    GasSchedule schedule;
    Gas add_service_execution = 0;
    Gas select_service_execution = 0;
    Gas register_breach_execution = 0;
    Gas calculate_penalty_execution = 0;
};

Calibration calibrate_schedule(const GasSchedule& pinned);

}  // namespace inpsim::contracts
