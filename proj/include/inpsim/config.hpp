#pragma once

#include "inpsim/workload.hpp"

#include <filesystem>
#include <string>

namespace inpsim::config {

// The shipped plan: the full two-phase sweep with background traffic and a
// relay calibrated so simulated latencies land in the observed envelope.
workload::ExperimentPlan default_plan();

// Parses a JSON plan. Keys missing from the document keep their default_plan()
// value; unknown keys and type errors throw Error(config_parse).
workload::ExperimentPlan parse_plan(std::string_view json_text);
workload::ExperimentPlan load_plan(const std::filesystem::path& path);

// Canonical JSON: every key present, sorted, fixed formatting.
std::string canonical_json(const workload::ExperimentPlan& plan);

// SHA-256 hex of canonical_json(plan); the seed is part of the plan.
std::string plan_digest(const workload::ExperimentPlan& plan);

}  // namespace inpsim::config
