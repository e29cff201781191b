#include "inpsim/gas.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

namespace inpsim::contracts {

namespace {

// Opcode overhead per function body, frozen from calibrate_schedule().
constexpr Gas kAddServiceExecution = 29'459;
constexpr Gas kSelectServiceExecution = 50'466;
constexpr Gas kRegisterBreachExecution = 1'565;
constexpr Gas kCalculatePenaltyExecution = 6'644;

constexpr std::array kPublished{
    PublishedGas{Function::add_service, true, 0, 162'500, "add_service first service"},
    PublishedGas{Function::add_service, false, 0, 147'500, "add_service subsequent service"},
    PublishedGas{Function::select_service, false, 1, 138'752, "select_service id 1"},
    PublishedGas{Function::select_service, true, 2, 155'992, "select_service id 2 (cold)"},
    PublishedGas{Function::select_service, false, 2, 138'892, "select_service id 2"},
    PublishedGas{Function::select_service, false, 3, 139'032, "select_service id 3"},
    PublishedGas{Function::select_service, false, 4, 139'172, "select_service id 4"},
    PublishedGas{Function::select_service, false, 5, 139'312, "select_service id 5"},
    PublishedGas{Function::register_breach, true, 0, 44'058, "register_breach first execution"},
    PublishedGas{Function::register_breach, false, 0, 26'958, "register_breach subsequent"},
    PublishedGas{Function::calculate_penalty, true, 0, 49'143, "calculate_penalty"},
};

std::vector<MicroOp> with_execution(std::vector<MicroOp> ops, Gas execution)
{
    ops.push_back({OpKind::execution, execution});
    return ops;
}

std::vector<MicroOp> structural(std::vector<MicroOp> ops)
{
    std::erase_if(ops, [](const MicroOp& op) { return op.kind == OpKind::execution; });
    return ops;
}

std::map<OpKind, std::int64_t> counts(const std::vector<MicroOp>& ops)
{
    std::map<OpKind, std::int64_t> out;
    for (const auto& op : ops) out[op.kind] += static_cast<std::int64_t>(op.count);
    return out;
}

}  // namespace

std::string_view to_string(Function fn)
{
    switch (fn) {
    case Function::add_service: return "add_service";
    case Function::select_service: return "select_service";
    case Function::register_breach: return "register_breach";
    case Function::calculate_penalty: return "calculate_penalty";
    }
    return "unknown";
}

std::string_view to_string(OpKind kind)
{
    switch (kind) {
    case OpKind::cold_sload: return "cold_sload";
    case OpKind::warm_sload: return "warm_sload";
    case OpKind::sstore_init: return "sstore_init";
    case OpKind::sstore_update: return "sstore_update";
    case OpKind::log_base: return "log_base";
    case OpKind::log_topic: return "log_topic";
    case OpKind::log_byte: return "log_byte";
    case OpKind::memory_word: return "memory_word";
    case OpKind::position_step: return "position_step";
    case OpKind::execution: return "execution";
    }
    return "unknown";
}

Gas GasSchedule::price(OpKind kind) const
{
    switch (kind) {
    case OpKind::cold_sload: return cold_sload;
    case OpKind::warm_sload: return warm_sload;
    case OpKind::sstore_init: return sstore_init;
    case OpKind::sstore_update: return sstore_update;
    case OpKind::log_base: return log_base;
    case OpKind::log_topic: return log_per_topic;
    case OpKind::log_byte: return log_per_byte;
    case OpKind::memory_word: return memory_expansion_unit;
    case OpKind::position_step: return position_step;
    case OpKind::execution: return execution_unit;
    }
    throw Error(Errc::unknown_op_kind, fmt::format("op kind {}", static_cast<int>(kind)));
}

GasSchedule default_schedule() { return GasSchedule{}; }

Gas price_receipt(std::span<const MicroOp> micro_ops, const GasSchedule& schedule)
{
    Gas total = schedule.tx_base;
    for (const auto& op : micro_ops) total += op.count * schedule.price(op.kind);
    return total;
}

std::span<const PublishedGas> published_gas_table() { return kPublished; }

std::optional<Gas> published_total(Function fn, bool cold_path, int position)
{
    for (const auto& row : kPublished)
        if (row.function == fn && row.cold_path == cold_path && row.position == position) return row.total;
    return std::nullopt;
}

// Storage layout behind the traces:
//   services[provider][id]      4 fresh slots (id, provider, location, cost)
//   providerServices[provider]  header slot (actor slot) + one fresh element slot
//   selections[consumer]        header slot (actor slot) + 3 fresh element slots
//   breaches[provider]          actor slot
//   penalties[user]             written once per assessment
std::vector<MicroOp> trace_add_service(bool first_service)
{
    return with_execution(
        {
            {OpKind::cold_sload, 1},  // duplicate-id probe on a fresh key
            {OpKind::sstore_init, 5},
            {first_service ? OpKind::sstore_init : OpKind::sstore_update, 1},
            {OpKind::log_base, 1},
            {OpKind::log_topic, 2},
            {OpKind::log_byte, 160},
            {OpKind::memory_word, 12},
        },
        kAddServiceExecution);
}

std::vector<MicroOp> trace_select_service(bool first_selection, int position)
{
    const auto steps = static_cast<std::uint64_t>(position > 1 ? position - 1 : 0);
    std::vector<MicroOp> ops{
        {OpKind::cold_sload, 4},  // getService() through the AddService contract
        {first_selection ? OpKind::cold_sload : OpKind::warm_sload, 1},
        {first_selection ? OpKind::sstore_init : OpKind::sstore_update, 1},
        {OpKind::sstore_init, 3},
        {OpKind::log_base, 1},
        {OpKind::log_topic, 3},
        {OpKind::log_byte, 32},
        {OpKind::memory_word, 10},
    };
    if (steps > 0) ops.push_back({OpKind::position_step, steps});
    return with_execution(std::move(ops), kSelectServiceExecution);
}

std::vector<MicroOp> trace_register_breach(bool cold_read, bool init_write)
{
    return with_execution(
        {
            {cold_read ? OpKind::cold_sload : OpKind::warm_sload, 1},
            {init_write ? OpKind::sstore_init : OpKind::sstore_update, 1},
            {OpKind::log_base, 1},
            {OpKind::log_topic, 2},
            {OpKind::log_byte, 32},
            {OpKind::memory_word, 4},
        },
        kRegisterBreachExecution);
}

std::vector<MicroOp> trace_calculate_penalty(bool init_write)
{
    return with_execution(
        {
            {OpKind::cold_sload, 1},  // breaches(user) through RegisterBreach
            {init_write ? OpKind::sstore_init : OpKind::sstore_update, 1},
            {OpKind::log_base, 1},
            {OpKind::log_topic, 2},
            {OpKind::log_byte, 32},
            {OpKind::memory_word, 6},
        },
        kCalculatePenaltyExecution);
}

Calibration calibrate_schedule(const GasSchedule& pinned)
{
    constexpr std::array unknowns{OpKind::cold_sload, OpKind::sstore_init, OpKind::position_step};
    const auto is_unknown = [&](OpKind k) { return std::find(unknowns.begin(), unknowns.end(), k) != unknowns.end(); };

    struct Equation {
        std::array<double, unknowns.size()> coef{};
        double rhs = 0.0;
        std::string what;
    };

    // Each equation is the difference of two structural traces against the
    // difference of their published totals; execution overhead cancels.
    const auto difference = [&](const std::vector<MicroOp>& hi, const std::vector<MicroOp>& lo, Gas hi_total,
                                Gas lo_total, std::string what) {
        Equation eq;
        eq.rhs = static_cast<double>(hi_total) - static_cast<double>(lo_total);
        eq.what = std::move(what);
        auto delta = counts(structural(hi));
        for (const auto& [kind, n] : counts(structural(lo))) delta[kind] -= n;
        for (const auto& [kind, n] : delta) {
            if (n == 0) continue;
            if (is_unknown(kind)) {
                const auto idx = static_cast<std::size_t>(
                    std::find(unknowns.begin(), unknowns.end(), kind) - unknowns.begin());
                eq.coef[idx] += static_cast<double>(n);
            } else {
                eq.rhs -= static_cast<double>(n) * static_cast<double>(pinned.price(kind));
            }
        }
        return eq;
    };

    const auto pub = [](Function fn, bool cold, int pos) { return *published_total(fn, cold, pos); };

    std::vector<Equation> eqs;
    eqs.push_back(difference(trace_add_service(true), trace_add_service(false), pub(Function::add_service, true, 0),
                             pub(Function::add_service, false, 0), "add_service cold-warm"));
    eqs.push_back(difference(trace_select_service(true, 2), trace_select_service(false, 2),
                             pub(Function::select_service, true, 2), pub(Function::select_service, false, 2),
                             "select_service cold-warm"));
    eqs.push_back(difference(trace_register_breach(true, true), trace_register_breach(false, false),
                             pub(Function::register_breach, true, 0), pub(Function::register_breach, false, 0),
                             "register_breach cold-warm"));
    for (int pos = 2; pos <= 5; ++pos) {
        eqs.push_back(difference(trace_select_service(false, pos), trace_select_service(false, pos - 1),
                                 pub(Function::select_service, false, pos), pub(Function::select_service, false, pos - 1),
                                 fmt::format("select_service step {}", pos)));
    }

    // Normal equations, solved by Gaussian elimination with partial pivoting.
    constexpr std::size_t n = unknowns.size();
    std::array<std::array<double, n + 1>, n> m{};
    for (const auto& eq : eqs) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) m[i][j] += eq.coef[i] * eq.coef[j];
            m[i][n] += eq.coef[i] * eq.rhs;
        }
    }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
        if (std::abs(m[pivot][col]) < 1e-12) throw Error(Errc::gas_mismatch, "calibration system is singular");
        std::swap(m[col], m[pivot]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (std::size_t c = col; c <= n; ++c) m[r][c] -= f * m[col][c];
        }
    }
    std::array<Gas, n> solved{};
    for (std::size_t i = 0; i < n; ++i) {
        const double x = m[i][n] / m[i][i];
        if (x < 0.0 || std::abs(x - std::round(x)) > 1e-6)
            throw Error(Errc::gas_mismatch, fmt::format("non-integral price for {}: {}", to_string(unknowns[i]), x));
        solved[i] = static_cast<Gas>(std::llround(x));
    }
    for (const auto& eq : eqs) {
        double lhs = 0.0;
        for (std::size_t i = 0; i < n; ++i) lhs += eq.coef[i] * static_cast<double>(solved[i]);
        if (std::abs(lhs - eq.rhs) > 1e-6) throw Error(Errc::gas_mismatch, "inconsistent delta: " + eq.what);
    }

    Calibration cal;
    cal.schedule = pinned;
    cal.schedule.cold_sload = solved[0];
    cal.schedule.sstore_init = solved[1];
    cal.schedule.position_step = solved[2];

    const auto residual = [&](const std::vector<MicroOp>& ops, Gas published) {
        const auto ops_only = structural(ops);
        const Gas priced = price_receipt(ops_only, cal.schedule);
        if (published < priced || (published - priced) % cal.schedule.execution_unit != 0)
            throw Error(Errc::gas_mismatch, "structural ops exceed published total");
        return (published - priced) / cal.schedule.execution_unit;
    };
    cal.add_service_execution = residual(trace_add_service(false), pub(Function::add_service, false, 0));
    cal.select_service_execution = residual(trace_select_service(false, 1), pub(Function::select_service, false, 1));
    cal.register_breach_execution =
        residual(trace_register_breach(false, false), pub(Function::register_breach, false, 0));
    cal.calculate_penalty_execution =
        residual(trace_calculate_penalty(true), pub(Function::calculate_penalty, true, 0));
    return cal;
}

}  // namespace inpsim::contracts
