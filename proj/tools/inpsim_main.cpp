#include "inpsim/config.hpp"
#include "inpsim/report.hpp"
#include "inpsim/stats.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>

using namespace inpsim;
namespace fs = std::filesystem;

namespace {

fs::path default_output_dir()
{
    if (const char* env = std::getenv(std::string(report::kOutputDirEnv).c_str()); env && *env) return env;
    return "results";
}

workload::ExperimentPlan resolve_plan(const std::string& config_path, std::optional<std::uint64_t> seed,
                                      const std::string& phase)
{
    auto plan = config_path.empty() ? config::default_plan() : config::load_plan(config_path);
    if (seed) plan.seed = *seed;
    if (!phase.empty()) {
        if (phase == "both")
            plan.phases = {workload::Phase::preliminary_agreement, workload::Phase::enforcement};
        else
            try {
                plan.phases = {workload::phase_from_string(phase)};
            } catch (const Error& e) {
                throw Error(Errc::config_parse, e.what());
            }
    }
    plan.validate();
    return plan;
}

int run_selftest()
{
    int failures = 0;
    const auto check = [&](std::string_view name, bool ok) {
        fmt::print("{} {}\n", ok ? "PASS" : "FAIL", name);
        failures += ok ? 0 : 1;
    };

    const auto audit = report::gas_audit(contracts::default_schedule());
    check("gas table reproduced", std::all_of(audit.begin(), audit.end(), [](const auto& r) { return r.match(); }));

    const auto kw = stats::kruskal_wallis({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
    check("kruskal-wallis reference groups", std::abs(kw.h_statistic - 7.2) < 1e-9 && std::abs(kw.p_value - std::exp(-3.6)) < 1e-9);

    const auto cd = stats::cliffs_delta(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6});
    check("cliff's delta reference groups", cd.delta == -1.0 && cd.magnitude == stats::Magnitude::large);

    auto plan = config::default_plan();
    plan.batch_sizes = {2};
    plan.rounds = 1;
    const auto result = workload::run_experiment(plan);
    check("two-phase smoke run record count",
          result.records.size() == workload::expected_record_count(plan, workload::Phase::preliminary_agreement) +
                                       workload::expected_record_count(plan, workload::Phase::enforcement));
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Simulator and analysis pipeline for an on-chain SLA marketplace"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::string phase;
    bool print_config = false;
    auto* simulate = app.add_subcommand("simulate", "Run the experiment plan and write a result bundle");
    simulate->add_option("-c,--config", config_path, "Plan file (JSON); defaults to the shipped plan");
    simulate->add_option("-o,--output-dir", output_dir,
                         fmt::format("Bundle parent directory (default: ${} or ./results)", report::kOutputDirEnv));
    simulate->add_option("-s,--seed", seed, "Override the plan seed");
    simulate->add_option("-p,--phase", phase, "preliminary_agreement, enforcement or both");
    simulate->add_flag("--print-config", print_config, "Print the resolved plan as JSON and exit");

    std::string bundle;
    auto* analyze = app.add_subcommand("analyze", "Batch summaries, Kruskal-Wallis and Dunn tables for a bundle");
    analyze->add_option("bundle", bundle, "Bundle directory")->required();
    auto* report_cmd = app.add_subcommand("report", "Box-plot data and mean series for an analyzed bundle");
    report_cmd->add_option("bundle", bundle, "Bundle directory")->required();

    std::string audit_config;
    auto* gas_audit = app.add_subcommand("gas-audit", "Check the gas schedule against the published per-call totals");
    gas_audit->add_option("-c,--config", audit_config, "Plan file whose contracts.gas_schedule is audited");

    auto* selftest = app.add_subcommand("selftest", "Quick internal consistency checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : report::config_error;
    }

    try {
        if (simulate->parsed()) {
            const auto plan = resolve_plan(config_path, seed, phase);
            if (print_config) {
                fmt::print("{}", config::canonical_json(plan));
                return report::ok;
            }
            const auto start = std::chrono::steady_clock::now();
            const auto b = report::simulate(plan, output_dir.empty() ? default_output_dir() : fs::path(output_dir));
            const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            fmt::print("records {} blocks {} wall {:.2f} s bundle {}\n", b.record_count, b.block_count, wall,
                       b.dir.string());
        } else if (analyze->parsed()) {
            for (const auto& f : report::analyze(bundle)) fmt::print("{}\n", f.string());
        } else if (report_cmd->parsed()) {
            for (const auto& f : report::report(bundle)) fmt::print("{}\n", f.string());
        } else if (gas_audit->parsed()) {
            const auto schedule =
                audit_config.empty() ? contracts::default_schedule() : config::load_plan(audit_config).contracts.schedule;
            const auto rows = report::gas_audit(schedule);
            fmt::print("{}", report::audit_table(rows));
            std::size_t bad = 0;
            for (const auto& r : rows) bad += r.match() ? 0 : 1;
            if (bad) {
                fmt::print(stderr, "GasMismatch: {} of {} published totals differ\n", bad, rows.size());
                return report::gas_mismatch;
            }
        } else if (selftest->parsed()) {
            return run_selftest();
        }
    } catch (const Error& e) {
        fmt::print(stderr, "{}\n", e.what());
        return report::exit_code_for(e.code());
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return report::ok;
}
