#pragma once

#include "inpsim/contracts.hpp"
#include "inpsim/stats.hpp"
#include "inpsim/workload.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace inpsim::report {

namespace fs = std::filesystem;

inline constexpr std::string_view kCodeVersion = "inpsim 0.1.0";
inline constexpr std::string_view kOutputDirEnv = "INPSIM_OUTPUT_DIR";

// Process exit codes.
enum ExitCode : int { ok = 0, config_error = 2, simulation_error = 3, incomplete_bundle = 4, gas_mismatch = 5 };

int exit_code_for(Errc code);

// Shortest round-trip decimal, '.' separator, no locale.
std::string format_number(double v);

std::string tx_records_csv(const std::vector<workload::TxRecord>& records);
std::vector<workload::TxRecord> parse_tx_records_csv(std::string_view text);
std::string blocks_csv(const std::vector<workload::BlockRecord>& blocks);
std::string events_csv(const std::vector<workload::EventRecord>& events);

struct Bundle {
    fs::path dir;
    workload::RunManifest manifest;
    std::size_t record_count = 0;
    std::size_t block_count = 0;
};

// Runs the plan and writes <output_dir>/<digest prefix>/ with config.json,
// manifest.json, blocks.csv, tx_records.csv and events.csv.
Bundle simulate(const workload::ExperimentPlan& plan, const fs::path& output_dir);

// Throws Error(incomplete_bundle) unless every simulate output is present and
// tx_records.csv matches the manifest digest.
workload::RunManifest verify_bundle(const fs::path& dir);
std::vector<workload::TxRecord> load_records(const fs::path& dir);

struct PhaseAnalysis {
    std::string phase;
    std::vector<workload::BatchSummary> summary;
    std::vector<stats::QuintileReport> reports;  // one per feature, in kAllFeatures order
};

std::vector<PhaseAnalysis> analyze_records(const std::vector<workload::TxRecord>& records);

std::string summary_csv(const std::vector<workload::BatchSummary>& summary);
// Feature, H, df, p, tie correction, interpretation; one row per report.
std::string kw_csv(const std::vector<stats::QuintileReport>& reports);
std::string dunn_csv(const stats::QuintileReport& report);
std::string quintiles_csv(const std::vector<stats::QuintileReport>& reports);

// Writes <bundle>/analysis/. Returns the files written.
std::vector<fs::path> analyze(const fs::path& bundle_dir);

// Writes <bundle>/report/ box-plot data and mean series. Requires analyze().
std::vector<fs::path> report(const fs::path& bundle_dir);

struct AuditRow {
    contracts::Function function;
    std::string path;
    int position = 0;
    Gas expected = 0;
    Gas actual = 0;

    [[nodiscard]] bool match() const { return expected == actual; }
};

// Drives every published (function, path, position) cell through a fresh
// contract world priced by `schedule`.
std::vector<AuditRow> gas_audit(const contracts::GasSchedule& schedule);
std::string audit_table(const std::vector<AuditRow>& rows);

}  // namespace inpsim::report
