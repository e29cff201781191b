#include "inpsim/report.hpp"

#include "inpsim/config.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace inpsim::report {

namespace {

using workload::TxRecord;

constexpr std::string_view kTxHeader =
    "phase,function,batch_size,round,tx_id,submit_time_s,confirm_time_s,latency_s,gas_used,gas_price_gwei,"
    "block_number,block_size_kb,block_tx_count";

std::string csv_field(std::string_view s)
{
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void write_file(const fs::path& path, std::string_view content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::invalid_argument, fmt::format("cannot write {}", path.string()));
    out << content;
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::incomplete_bundle, fmt::format("missing {}", path.string()));
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
T parse_field(std::string_view s, std::size_t line)
{
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw Error(Errc::incomplete_bundle, fmt::format("tx_records.csv line {}: bad field '{}'", line, s));
    return v;
}

std::string outliers_field(const std::vector<double>& values)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ';';
        out += format_number(values[i]);
    }
    return out;
}

std::string box_row(const stats::BoxSummary& b)
{
    return fmt::format("{},{},{},{},{},{},{},{}", b.n, format_number(b.mean), format_number(b.median),
                       format_number(b.q1), format_number(b.q3), format_number(b.whisker_low),
                       format_number(b.whisker_high), outliers_field(b.outliers));
}

constexpr std::string_view kBoxColumns = "n,mean,median,q1,q3,whisker_lo,whisker_hi,outliers";

// Phases in first-seen order.
std::vector<std::pair<std::string, std::vector<TxRecord>>> by_phase(const std::vector<TxRecord>& records)
{
    std::vector<std::pair<std::string, std::vector<TxRecord>>> out;
    for (const auto& r : records) {
        auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == r.phase; });
        if (it == out.end()) {
            out.emplace_back(r.phase, std::vector<TxRecord>{});
            it = out.end() - 1;
        }
        it->second.push_back(r);
    }
    return out;
}

double feature_value(const TxRecord& r, stats::Feature f)
{
    switch (f) {
    case stats::Feature::gas_price_gwei: return r.gas_price_gwei;
    case stats::Feature::block_size_kb: return r.block_size_kb;
    case stats::Feature::block_tx_count: return static_cast<double>(r.block_tx_count);
    }
    return 0.0;
}

std::string manifest_json(const workload::RunManifest& m, std::size_t records, std::size_t blocks, std::size_t events)
{
    nlohmann::json j;
    j["seed"] = m.seed;
    j["config_digest"] = m.config_digest;
    j["code_version"] = m.code_version;
    j["start_time_s"] = m.start_time_s;
    j["end_time_s"] = m.end_time_s;
    j["records_digest"] = m.records_digest;
    j["record_count"] = records;
    j["block_count"] = blocks;
    j["event_count"] = events;
    return j.dump(2) + "\n";
}

}  // namespace

int exit_code_for(Errc code)
{
    switch (code) {
    case Errc::config_parse: return config_error;
    case Errc::incomplete_bundle: return incomplete_bundle;
    case Errc::gas_mismatch: return gas_mismatch;
    case Errc::simulation_failure: return simulation_error;
    default: return 1;
    }
}

std::string format_number(double v) { return fmt::format("{}", v); }

std::string tx_records_csv(const std::vector<TxRecord>& records)
{
    std::string out(kTxHeader);
    out += '\n';
    for (const auto& r : records) {
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.phase, r.function, r.batch_size, r.round,
                           r.tx_id, format_number(r.submit_time_s), format_number(r.confirm_time_s),
                           format_number(r.latency_s), r.gas_used, format_number(r.gas_price_gwei), r.block_number,
                           format_number(r.block_size_kb), r.block_tx_count);
    }
    return out;
}

std::vector<TxRecord> parse_tx_records_csv(std::string_view text)
{
    std::vector<TxRecord> out;
    const auto lines = split(text, '\n');
    if (lines.empty() || lines.front() != kTxHeader)
        throw Error(Errc::incomplete_bundle, "tx_records.csv: unexpected header");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split(lines[i], ',');
        if (f.size() != 13) throw Error(Errc::incomplete_bundle, fmt::format("tx_records.csv line {}: {} fields", i + 1, f.size()));
        TxRecord r;
        r.phase = std::string(f[0]);
        r.function = std::string(f[1]);
        r.batch_size = parse_field<std::size_t>(f[2], i + 1);
        r.round = parse_field<std::size_t>(f[3], i + 1);
        r.tx_id = parse_field<std::uint64_t>(f[4], i + 1);
        r.submit_time_s = parse_field<double>(f[5], i + 1);
        r.confirm_time_s = parse_field<double>(f[6], i + 1);
        r.latency_s = parse_field<double>(f[7], i + 1);
        r.gas_used = parse_field<Gas>(f[8], i + 1);
        r.gas_price_gwei = parse_field<double>(f[9], i + 1);
        r.block_number = parse_field<std::uint64_t>(f[10], i + 1);
        r.block_size_kb = parse_field<double>(f[11], i + 1);
        r.block_tx_count = parse_field<std::size_t>(f[12], i + 1);
        out.push_back(std::move(r));
    }
    return out;
}

std::string blocks_csv(const std::vector<workload::BlockRecord>& blocks)
{
    std::string out = "phase,batch_size,round,block_number,timestamp_s,proposer,tx_count,gas_used,byte_size,base_fee_gwei\n";
    for (const auto& b : blocks)
        out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", b.phase, b.batch_size, b.round, b.block_number,
                           format_number(b.timestamp_s), b.proposer, b.tx_count, b.gas_used, b.byte_size,
                           format_number(b.base_fee));
    return out;
}

std::string events_csv(const std::vector<workload::EventRecord>& events)
{
    std::string out = "phase,batch_size,round,block_number,tx_id,kind,detail\n";
    for (const auto& e : events)
        out += fmt::format("{},{},{},{},{},{},{}\n", e.phase, e.batch_size, e.round, e.block_number, e.tx_id, e.kind,
                           csv_field(e.detail));
    return out;
}

Bundle simulate(const workload::ExperimentPlan& plan, const fs::path& output_dir)
{
    const std::string digest = config::plan_digest(plan);
    auto result = workload::run_experiment(plan);

    const std::string records = tx_records_csv(result.records);
    Bundle bundle;
    bundle.dir = output_dir / digest.substr(0, 12);
    bundle.manifest.seed = plan.seed;
    bundle.manifest.config_digest = digest;
    bundle.manifest.code_version = std::string(kCodeVersion);
    bundle.manifest.start_time_s = 0.0;
    bundle.manifest.end_time_s = result.end_time_s;
    bundle.manifest.records_digest = to_hex(sha256(records));
    bundle.record_count = result.records.size();
    bundle.block_count = result.blocks.size();

    fs::create_directories(bundle.dir);
    // The manifest goes last so an interrupted run is detectably incomplete.
    fs::remove(bundle.dir / "manifest.json");
    write_file(bundle.dir / "config.json", config::canonical_json(plan));
    write_file(bundle.dir / "tx_records.csv", records);
    write_file(bundle.dir / "blocks.csv", blocks_csv(result.blocks));
    write_file(bundle.dir / "events.csv", events_csv(result.events));
    write_file(bundle.dir / "manifest.json",
               manifest_json(bundle.manifest, result.records.size(), result.blocks.size(), result.events.size()));
    return bundle;
}

workload::RunManifest verify_bundle(const fs::path& dir)
{
    for (const char* name : {"manifest.json", "config.json", "tx_records.csv", "blocks.csv", "events.csv"})
        if (!fs::is_regular_file(dir / name))
            throw Error(Errc::incomplete_bundle, fmt::format("{} has no {}", dir.string(), name));

    workload::RunManifest m;
    try {
        const auto j = nlohmann::json::parse(read_file(dir / "manifest.json"));
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config_digest = j.at("config_digest").get<std::string>();
        m.code_version = j.at("code_version").get<std::string>();
        m.start_time_s = j.at("start_time_s").get<double>();
        m.end_time_s = j.at("end_time_s").get<double>();
        m.records_digest = j.at("records_digest").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::incomplete_bundle, fmt::format("manifest.json: {}", e.what()));
    }
    if (to_hex(sha256(read_file(dir / "tx_records.csv"))) != m.records_digest)
        throw Error(Errc::incomplete_bundle, "tx_records.csv does not match the manifest digest");
    return m;
}

std::vector<TxRecord> load_records(const fs::path& dir)
{
    verify_bundle(dir);
    return parse_tx_records_csv(read_file(dir / "tx_records.csv"));
}

std::vector<PhaseAnalysis> analyze_records(const std::vector<TxRecord>& records)
{
    std::vector<PhaseAnalysis> out;
    for (const auto& [phase, rows] : by_phase(records)) {
        PhaseAnalysis a;
        a.phase = phase;
        a.summary = workload::summarize_by_batch(rows);
        std::vector<double> latency;
        for (const auto& r : rows) latency.push_back(r.latency_s);
        for (auto f : stats::kAllFeatures) {
            std::vector<double> feature;
            for (const auto& r : rows) feature.push_back(feature_value(r, f));
            a.reports.push_back(stats::build_report(feature, latency, f));
        }
        out.push_back(std::move(a));
    }
    return out;
}

std::string summary_csv(const std::vector<workload::BatchSummary>& summary)
{
    std::string out =
        "function,batch_size,n,tx_count_mean,tx_count_std,block_size_kb_mean,block_size_kb_std,gas_price_gwei_mean,"
        "gas_price_gwei_std,latency_s_mean,latency_s_std,single_observation\n";
    for (const auto& s : summary)
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", s.function, s.batch_size, s.n,
                           format_number(s.tx_count.mean), format_number(s.tx_count.stddev),
                           format_number(s.block_size_kb.mean), format_number(s.block_size_kb.stddev),
                           format_number(s.gas_price_gwei.mean), format_number(s.gas_price_gwei.stddev),
                           format_number(s.latency_s.mean), format_number(s.latency_s.stddev), s.single ? "yes" : "no");
    return out;
}

std::string kw_csv(const std::vector<stats::QuintileReport>& reports)
{
    std::string out = "feature,h_statistic,df,p_value,tie_correction,significant,interpretation\n";
    for (const auto& r : reports) {
        const bool sig = r.kw.p_value < 0.05;
        out += fmt::format("{},{},{},{},{},{},{}\n", stats::to_string(r.feature), format_number(r.kw.h_statistic),
                           r.kw.df, format_number(r.kw.p_value), format_number(r.kw.tie_correction),
                           sig ? "Yes" : "No",
                           sig ? "latency differs across quintiles" : "no detectable latency difference");
    }
    return out;
}

std::string dunn_csv(const stats::QuintileReport& report)
{
    std::string out = "comparison,z,p_raw,p_adjusted,significant,cliffs_delta,magnitude\n";
    for (const auto& p : report.pairs)
        out += fmt::format("Q{} vs Q{},{},{},{},{},{},{}\n", p.dunn.i + 1, p.dunn.j + 1, format_number(p.dunn.z),
                           format_number(p.dunn.p_raw), format_number(p.dunn.p_adjusted),
                           p.dunn.significant ? "Yes" : "No", format_number(p.cliff.delta),
                           stats::to_string(p.cliff.magnitude));
    return out;
}

std::string quintiles_csv(const std::vector<stats::QuintileReport>& reports)
{
    std::string out = "feature,b1,b2,b3,b4,n_q1,n_q2,n_q3,n_q4,n_q5\n";
    for (const auto& r : reports)
        out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", stats::to_string(r.feature), format_number(r.breakpoints[0]),
                           format_number(r.breakpoints[1]), format_number(r.breakpoints[2]),
                           format_number(r.breakpoints[3]), r.boxes[0].n, r.boxes[1].n, r.boxes[2].n, r.boxes[3].n,
                           r.boxes[4].n);
    return out;
}

std::vector<fs::path> analyze(const fs::path& bundle_dir)
{
    const auto analyses = analyze_records(load_records(bundle_dir));
    const fs::path dir = bundle_dir / "analysis";
    fs::create_directories(dir);
    std::vector<fs::path> written;
    const auto emit = [&](const std::string& name, const std::string& content) {
        write_file(dir / name, content);
        written.push_back(dir / name);
    };
    for (const auto& a : analyses) {
        emit(fmt::format("summary_{}.csv", a.phase), summary_csv(a.summary));
        emit(fmt::format("kw_{}.csv", a.phase), kw_csv(a.reports));
        emit(fmt::format("quintiles_{}.csv", a.phase), quintiles_csv(a.reports));
        for (const auto& r : a.reports)
            emit(fmt::format("dunn_{}_{}.csv", a.phase, stats::to_string(r.feature)), dunn_csv(r));
    }
    return written;
}

std::vector<fs::path> report(const fs::path& bundle_dir)
{
    const auto records = load_records(bundle_dir);
    const auto phases = by_phase(records);
    for (const auto& [phase, _] : phases)
        if (!fs::is_regular_file(bundle_dir / "analysis" / fmt::format("kw_{}.csv", phase)))
            throw Error(Errc::incomplete_bundle, fmt::format("{} has not been analyzed", bundle_dir.string()));

    const fs::path dir = bundle_dir / "report";
    fs::create_directories(dir);
    std::vector<fs::path> written;
    const auto emit = [&](const std::string& name, const std::string& content) {
        write_file(dir / name, content);
        written.push_back(dir / name);
    };

    for (const auto& [phase, rows] : phases) {
        std::map<std::pair<std::string, std::size_t>, std::vector<double>> groups;
        for (const auto& r : rows) groups[{r.function, r.batch_size}].push_back(r.latency_s);
        std::string box = fmt::format("function,batch_size,{}\n", kBoxColumns);
        std::string mean = "function,batch_size,mean_latency_s\n";
        for (const auto& [key, lat] : groups) {
            const auto b = stats::box_summary(lat);
            box += fmt::format("{},{},{}\n", key.first, key.second, box_row(b));
            mean += fmt::format("{},{},{}\n", key.first, key.second, format_number(b.mean));
        }
        emit(fmt::format("box_batch_{}.csv", phase), box);
        emit(fmt::format("mean_batch_{}.csv", phase), mean);

        std::vector<double> latency;
        for (const auto& r : rows) latency.push_back(r.latency_s);
        for (auto f : stats::kAllFeatures) {
            std::vector<double> feature;
            for (const auto& r : rows) feature.push_back(feature_value(r, f));
            const auto q = stats::build_report(feature, latency, f);
            std::string qbox = fmt::format("quintile,{}\n", kBoxColumns);
            std::string qmean = "quintile,mean_latency_s\n";
            for (std::size_t i = 0; i < 5; ++i) {
                qbox += fmt::format("Q{},{}\n", i + 1, box_row(q.boxes[i]));
                qmean += fmt::format("Q{},{}\n", i + 1, format_number(q.boxes[i].mean));
            }
            emit(fmt::format("box_quintile_{}_{}.csv", phase, stats::to_string(f)), qbox);
            emit(fmt::format("mean_quintile_{}_{}.csv", phase, stats::to_string(f)), qmean);
        }
    }
    return written;
}

std::vector<AuditRow> gas_audit(const contracts::GasSchedule& schedule)
{
    using contracts::Function;
    contracts::ContractsConfig cfg;
    cfg.schedule = schedule;
    cfg.strict_gas = false;
    contracts::ContractWorld world(cfg);

    const Address provider = Address::derive("audit-provider", 0, 0);
    const Address consumer = Address::derive("audit-consumer", 0, 0);
    world.register_actor(provider, contracts::Role::provider);
    world.register_actor(consumer, contracts::Role::consumer);

    std::map<std::tuple<Function, bool, int>, Gas> seen;
    const auto note = [&](const contracts::CallResult& r) {
        seen.emplace(std::tuple{r.receipt.function, r.receipt.cold_path, r.receipt.position}, r.receipt.total);
    };
    for (std::uint64_t id = 1; id <= 5; ++id) note(world.add_service(provider, id, fmt::format("site-{}", id), id));
    note(world.select_service(consumer, provider, 2));
    for (std::uint64_t id = 1; id <= 5; ++id) note(world.select_service(consumer, provider, id));
    for (std::uint64_t k = 0; k < cfg.max_breach; ++k) note(world.register_breach(provider, 1));
    note(world.calculate_penalty(consumer, provider));

    std::vector<AuditRow> rows;
    for (const auto& cell : contracts::published_gas_table()) {
        AuditRow row{cell.function, std::string(cell.label), cell.position, cell.total, 0};
        if (auto it = seen.find({cell.function, cell.cold_path, cell.position}); it != seen.end()) row.actual = it->second;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string audit_table(const std::vector<AuditRow>& rows)
{
    std::string out = fmt::format("{:<34} {:>10} {:>10}  {}\n", "path", "expected", "actual", "status");
    for (const auto& r : rows)
        out += fmt::format("{:<34} {:>10} {:>10}  {}\n", r.path, r.expected, r.actual, r.match() ? "ok" : "MISMATCH");
    return out;
}

}  // namespace inpsim::report
