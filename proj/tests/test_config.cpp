#include "inpsim/config.hpp"

#include <doctest.h>

using namespace inpsim;

namespace {

Errc parse_error(std::string_view text)
{
    try {
        (void)config::parse_plan(text);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return Errc::invalid_argument;
}

}  // namespace

TEST_CASE("canonical JSON round-trips")
{
    auto plan = config::default_plan();
    plan.seed = 77;
    plan.batch_sizes = {3, 9};
    plan.chain.relay.propagation_s = Distribution::uniform(0.5, 2.0);
    plan.contracts.reset_on_penalty = true;
    plan.fee_policy.mode = workload::FeePolicy::Mode::fixed;
    const auto text = config::canonical_json(plan);
    const auto back = config::parse_plan(text);
    CHECK(config::canonical_json(back) == text);
    CHECK(back.chain == plan.chain);
    CHECK(back.contracts == plan.contracts);
    CHECK(back.fee_policy == plan.fee_policy);
    CHECK(back.batch_sizes == plan.batch_sizes);
    CHECK(config::plan_digest(back) == config::plan_digest(plan));
}

TEST_CASE("missing keys keep the defaults")
{
    const auto plan = config::parse_plan(R"({"seed": 5, "workload": {"rounds": 2}})");
    const auto def = config::default_plan();
    CHECK(plan.seed == 5);
    CHECK(plan.rounds == 2);
    CHECK(plan.batch_sizes == def.batch_sizes);
    CHECK(plan.chain == def.chain);
    CHECK(config::parse_plan("{}").chain.slot_duration_s == 12);
}

TEST_CASE("the shipped defaults")
{
    const auto plan = config::default_plan();
    CHECK(plan.batch_sizes == std::vector<std::size_t>{2, 10, 18, 26, 34, 42, 50});
    CHECK(plan.rounds == 10);
    CHECK(plan.total_accounts == 100);
    CHECK(plan.chain.slot_duration_s == 12);
    CHECK(plan.contracts.max_breach == 3);
    CHECK(plan.contracts.fidelity_fee == 1);
    CHECK(plan.contracts.schedule == contracts::default_schedule());
    CHECK_NOTHROW(plan.validate());
}

TEST_CASE("bad documents are config errors")
{
    CHECK(parse_error("{") == Errc::config_parse);
    CHECK(parse_error(R"({"sede": 1})") == Errc::config_parse);
    CHECK(parse_error(R"({"chain": {"slot_duration": 12}})") == Errc::config_parse);
    CHECK(parse_error(R"({"seed": "one"})") == Errc::config_parse);
    CHECK(parse_error(R"({"background": {"tip_dist": {"kind": "gamma"}}})") == Errc::config_parse);
    CHECK(parse_error(R"({"workload": {"phase": "neither"}})") == Errc::config_parse);
    CHECK(parse_error(R"({"workload": {"batch_sizes": [0]}})") == Errc::config_parse);
}

TEST_CASE("the seed is part of the digest")
{
    auto a = config::default_plan();
    auto b = a;
    b.seed = 1;
    CHECK(config::plan_digest(a) != config::plan_digest(b));
    CHECK(config::plan_digest(a).size() == 64);
}
