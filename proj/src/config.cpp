#include "inpsim/config.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace inpsim::config {

namespace {

using nlohmann::json;
using workload::ExperimentPlan;
using workload::FeePolicy;
using workload::Phase;

json dist_to_json(const Distribution& d)
{
    switch (d.kind) {
    case Distribution::Kind::constant: return {{"kind", "constant"}, {"value", d.a}};
    case Distribution::Kind::uniform: return {{"kind", "uniform"}, {"lo", d.a}, {"hi", d.b}};
    case Distribution::Kind::lognormal: return {{"kind", "lognormal"}, {"mu", d.a}, {"sigma", d.b}};
    }
    return {};
}

double number_at(const json& j, const char* key, const std::string& where)
{
    if (!j.contains(key) || !j.at(key).is_number())
        throw Error(Errc::config_parse, fmt::format("{}: missing numeric '{}'", where, key));
    return j.at(key).get<double>();
}

Distribution dist_from_json(const json& j, const std::string& where)
{
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
        throw Error(Errc::config_parse, fmt::format("{}: expected an object with a 'kind'", where));
    const auto kind = j.at("kind").get<std::string>();
    const auto expect_keys = [&](std::initializer_list<const char*> keys) {
        for (const auto& [k, _] : j.items()) {
            if (k == "kind") continue;
            if (std::find_if(keys.begin(), keys.end(), [&](const char* e) { return k == e; }) == keys.end())
                throw Error(Errc::config_parse, fmt::format("{}: unknown key '{}' for {}", where, k, kind));
        }
    };
    Distribution d;
    if (kind == "constant") {
        expect_keys({"value"});
        d = Distribution::constant(number_at(j, "value", where));
    } else if (kind == "uniform") {
        expect_keys({"lo", "hi"});
        d = Distribution::uniform(number_at(j, "lo", where), number_at(j, "hi", where));
    } else if (kind == "lognormal") {
        expect_keys({"mu", "sigma"});
        d = Distribution::lognormal(number_at(j, "mu", where), number_at(j, "sigma", where));
    } else {
        throw Error(Errc::config_parse, fmt::format("{}: unknown distribution kind '{}'", where, kind));
    }
    return d;
}

bool is_dist_key(const std::string& key) { return key.ends_with("_dist"); }

// Overlays `user` onto `base`, which carries every known key with a value of
// the expected type.
void merge_strict(json& base, const json& user, const std::string& where)
{
    if (!user.is_object()) throw Error(Errc::config_parse, fmt::format("{}: expected an object", where));
    for (const auto& [key, value] : user.items()) {
        const std::string path = where.empty() ? key : where + "." + key;
        if (!base.contains(key)) throw Error(Errc::config_parse, fmt::format("unknown key '{}'", path));
        json& slot = base[key];
        if (is_dist_key(key)) {
            dist_from_json(value, path);
            slot = value;
        } else if (slot.is_object()) {
            merge_strict(slot, value, path);
        } else if (slot.is_number_unsigned()) {
            if (!value.is_number_integer() || (value.is_number_integer() && value.get<std::int64_t>() < 0))
                throw Error(Errc::config_parse, fmt::format("'{}' must be a non-negative integer", path));
            slot = value.get<std::uint64_t>();
        } else if (slot.is_number()) {
            if (!value.is_number()) throw Error(Errc::config_parse, fmt::format("'{}' must be a number", path));
            slot = value.get<double>();
        } else if (slot.is_array()) {
            if (!value.is_array()) throw Error(Errc::config_parse, fmt::format("'{}' must be a list", path));
            for (const auto& v : value)
                if (!v.is_number_unsigned()) throw Error(Errc::config_parse, fmt::format("'{}' must hold non-negative integers", path));
            slot = value;
        } else if (slot.type() != value.type()) {
            throw Error(Errc::config_parse, fmt::format("'{}' has the wrong type", path));
        } else {
            slot = value;
        }
    }
}

std::string phases_name(const std::vector<Phase>& phases)
{
    if (phases.size() == 2) return "both";
    return std::string(workload::to_string(phases.front()));
}

std::vector<Phase> phases_from_name(const std::string& name)
{
    if (name == "both") return {Phase::preliminary_agreement, Phase::enforcement};
    try {
        return {workload::phase_from_string(name)};
    } catch (const Error&) {
        throw Error(Errc::config_parse, fmt::format("workload.phase: unknown phase '{}'", name));
    }
}

json to_json(const ExperimentPlan& p)
{
    const auto& c = p.chain;
    const auto& s = p.contracts.schedule;
    json j;
    j["seed"] = p.seed;
    j["chain"] = {
        {"slot_duration_s", static_cast<std::uint64_t>(c.slot_duration_s)},
        {"block_gas_limit", c.block_gas_limit},
        {"block_gas_target", c.block_gas_target},
        {"block_byte_limit", c.block_byte_limit},
        {"header_bytes", c.header_bytes},
        {"tx_overhead_bytes", c.tx_overhead_bytes},
        {"base_fee_initial_gwei", c.base_fee_initial},
        {"base_fee_max_change_fraction", c.base_fee_max_change_fraction},
        {"finality_depth", c.finality_depth},
    };
    j["relay"] = {
        {"service_time_ms", static_cast<std::uint64_t>(c.relay.service_time.count())},
        {"propagation_s_dist", dist_to_json(c.relay.propagation_s)},
    };
    j["background"] = {
        {"arrival_rate", c.background.arrival_rate},
        {"tip_dist", dist_to_json(c.background.tip)},
        {"fee_cap_dist", dist_to_json(c.background.fee_cap)},
        {"gas_dist", dist_to_json(c.background.gas_usage)},
        {"payload_dist", dist_to_json(c.background.payload_bytes)},
        {"ttl_slots", c.background.ttl_slots},
    };
    j["workload"] = {
        {"phase", phases_name(p.phases)},
        {"batch_sizes", p.batch_sizes},
        {"rounds", p.rounds},
        {"total_accounts", p.total_accounts},
        {"services_per_provider", p.services_per_provider},
        {"breaches_per_provider", p.breaches_per_provider},
        {"validators", p.validators},
        {"validator_stake_gwei", p.validator_stake},
        {"account_funding_gwei", p.account_funding},
        {"warmup_slots", p.warmup_slots},
        {"max_slots_per_cell", p.max_slots_per_cell},
        {"marketplace_gas_limit", p.marketplace_gas_limit},
        {"enforcement_gas_limit", p.enforcement_gas_limit},
    };
    j["fees"] = {
        {"mode", std::string(workload::to_string(p.fee_policy.mode))},
        {"suggested_tip_quantile", p.fee_policy.suggested_tip_quantile},
        {"fixed_tip_gwei", p.fee_policy.fixed_tip},
        {"lookback_blocks", p.fee_policy.lookback_blocks},
        {"max_fee_base_multiplier", p.fee_policy.max_fee_base_multiplier},
    };
    j["contracts"] = {
        {"max_services_per_provider", p.contracts.max_services_per_provider},
        {"max_breach", p.contracts.max_breach},
        {"fidelity_fee", p.contracts.fidelity_fee},
        {"reset_on_penalty", p.contracts.reset_on_penalty},
        {"strict_gas", p.contracts.strict_gas},
        {"gas_schedule",
         {
             {"tx_base", s.tx_base},
             {"cold_sload", s.cold_sload},
             {"warm_sload", s.warm_sload},
             {"sstore_init", s.sstore_init},
             {"sstore_update", s.sstore_update},
             {"log_base", s.log_base},
             {"log_per_topic", s.log_per_topic},
             {"log_per_byte", s.log_per_byte},
             {"memory_expansion_unit", s.memory_expansion_unit},
             {"position_step", s.position_step},
             {"execution_unit", s.execution_unit},
         }},
    };
    return j;
}

ExperimentPlan from_json(const json& j)
{
    ExperimentPlan p;
    p.seed = j.at("seed").get<std::uint64_t>();

    const auto& c = j.at("chain");
    p.chain.slot_duration_s = static_cast<std::int64_t>(c.at("slot_duration_s").get<std::uint64_t>());
    p.chain.block_gas_limit = c.at("block_gas_limit").get<Gas>();
    p.chain.block_gas_target = c.at("block_gas_target").get<Gas>();
    p.chain.block_byte_limit = c.at("block_byte_limit").get<std::size_t>();
    p.chain.header_bytes = c.at("header_bytes").get<std::size_t>();
    p.chain.tx_overhead_bytes = c.at("tx_overhead_bytes").get<std::size_t>();
    p.chain.base_fee_initial = c.at("base_fee_initial_gwei").get<double>();
    p.chain.base_fee_max_change_fraction = c.at("base_fee_max_change_fraction").get<double>();
    p.chain.finality_depth = c.at("finality_depth").get<std::uint64_t>();

    const auto& r = j.at("relay");
    p.chain.relay.service_time = Millis{static_cast<std::int64_t>(r.at("service_time_ms").get<std::uint64_t>())};
    p.chain.relay.propagation_s = dist_from_json(r.at("propagation_s_dist"), "relay.propagation_s_dist");

    const auto& b = j.at("background");
    p.chain.background.arrival_rate = b.at("arrival_rate").get<double>();
    p.chain.background.tip = dist_from_json(b.at("tip_dist"), "background.tip_dist");
    p.chain.background.fee_cap = dist_from_json(b.at("fee_cap_dist"), "background.fee_cap_dist");
    p.chain.background.gas_usage = dist_from_json(b.at("gas_dist"), "background.gas_dist");
    p.chain.background.payload_bytes = dist_from_json(b.at("payload_dist"), "background.payload_dist");
    p.chain.background.ttl_slots = b.at("ttl_slots").get<std::uint64_t>();

    const auto& w = j.at("workload");
    p.phases = phases_from_name(w.at("phase").get<std::string>());
    p.batch_sizes = w.at("batch_sizes").get<std::vector<std::size_t>>();
    p.rounds = w.at("rounds").get<std::size_t>();
    p.total_accounts = w.at("total_accounts").get<std::size_t>();
    p.services_per_provider = w.at("services_per_provider").get<std::size_t>();
    p.breaches_per_provider = w.at("breaches_per_provider").get<std::size_t>();
    p.validators = w.at("validators").get<std::size_t>();
    p.validator_stake = w.at("validator_stake_gwei").get<std::uint64_t>();
    p.account_funding = w.at("account_funding_gwei").get<double>();
    p.warmup_slots = w.at("warmup_slots").get<std::uint64_t>();
    p.max_slots_per_cell = w.at("max_slots_per_cell").get<std::uint64_t>();
    p.marketplace_gas_limit = w.at("marketplace_gas_limit").get<Gas>();
    p.enforcement_gas_limit = w.at("enforcement_gas_limit").get<Gas>();

    const auto& f = j.at("fees");
    const auto mode = f.at("mode").get<std::string>();
    if (mode == "network_suggested")
        p.fee_policy.mode = FeePolicy::Mode::network_suggested;
    else if (mode == "fixed")
        p.fee_policy.mode = FeePolicy::Mode::fixed;
    else
        throw Error(Errc::config_parse, fmt::format("fees.mode: unknown mode '{}'", mode));
    p.fee_policy.suggested_tip_quantile = f.at("suggested_tip_quantile").get<double>();
    p.fee_policy.fixed_tip = f.at("fixed_tip_gwei").get<double>();
    p.fee_policy.lookback_blocks = f.at("lookback_blocks").get<std::size_t>();
    p.fee_policy.max_fee_base_multiplier = f.at("max_fee_base_multiplier").get<double>();

    const auto& k = j.at("contracts");
    p.contracts.max_services_per_provider = k.at("max_services_per_provider").get<std::size_t>();
    p.contracts.max_breach = k.at("max_breach").get<std::uint64_t>();
    p.contracts.fidelity_fee = k.at("fidelity_fee").get<std::uint64_t>();
    p.contracts.reset_on_penalty = k.at("reset_on_penalty").get<bool>();
    p.contracts.strict_gas = k.at("strict_gas").get<bool>();
    const auto& g = k.at("gas_schedule");
    auto& s = p.contracts.schedule;
    s.tx_base = g.at("tx_base").get<Gas>();
    s.cold_sload = g.at("cold_sload").get<Gas>();
    s.warm_sload = g.at("warm_sload").get<Gas>();
    s.sstore_init = g.at("sstore_init").get<Gas>();
    s.sstore_update = g.at("sstore_update").get<Gas>();
    s.log_base = g.at("log_base").get<Gas>();
    s.log_per_topic = g.at("log_per_topic").get<Gas>();
    s.log_per_byte = g.at("log_per_byte").get<Gas>();
    s.memory_expansion_unit = g.at("memory_expansion_unit").get<Gas>();
    s.position_step = g.at("position_step").get<Gas>();
    s.execution_unit = g.at("execution_unit").get<Gas>();
    return p;
}

}  // namespace

ExperimentPlan default_plan()
{
    ExperimentPlan p;
    p.chain.background.arrival_rate = 150.0;
    p.chain.relay.service_time = Millis{150};
    p.chain.relay.propagation_s = Distribution::lognormal(1.3, 1.3);
    return p;
}

ExperimentPlan parse_plan(std::string_view json_text)
{
    json user;
    try {
        user = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(Errc::config_parse, e.what());
    }
    json merged = to_json(default_plan());
    merge_strict(merged, user, "");
    ExperimentPlan plan;
    try {
        plan = from_json(merged);
        plan.validate();
    } catch (const json::exception& e) {
        throw Error(Errc::config_parse, e.what());
    } catch (const Error& e) {
        if (e.code() == Errc::config_parse) throw;
        std::string_view detail = e.what();
        detail.remove_prefix(std::min(detail.size(), to_string(e.code()).size() + 2));
        throw Error(Errc::config_parse, std::string(detail));
    }
    return plan;
}

ExperimentPlan load_plan(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(Errc::config_parse, fmt::format("cannot read config '{}'", path.string()));
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return parse_plan(text.str());
    } catch (const Error& e) {
        std::string_view detail = e.what();
        detail.remove_prefix(std::min(detail.size(), to_string(e.code()).size() + 2));
        throw Error(Errc::config_parse, fmt::format("{}: {}", path.string(), detail));
    }
}

std::string canonical_json(const ExperimentPlan& plan) { return to_json(plan).dump(2) + "\n"; }

std::string plan_digest(const ExperimentPlan& plan) { return to_hex(sha256(canonical_json(plan))); }

}  // namespace inpsim::config
