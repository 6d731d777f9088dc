#pragma once

#include <string>
#include <vector>

#include "plastinet/cl_runner.hpp"
#include "plastinet/rl_runner.hpp"

namespace plastinet {

struct BudgetJobConfig {
    std::int64_t d = 64;
    std::int64_t budget = 81920;
    int stages = 10;
    std::vector<std::string> methods = {"none", "net2wider", "progressive", "injection"};
    std::vector<std::int64_t> granularities = {1, 2, 4}; // dynamic_moe series
};

struct GenDataConfig {
    DatasetConfig data;
    std::string name = "dataset";
};

/// One JSON document: {"kind": "...", "<kind>": {...}}. Unknown fields are
/// rejected at every level; missing required fields raise ConfigError naming
/// the key.
struct ExperimentConfig {
    std::string kind; // cl | rl | budget | gen-data
    CLConfig cl;
    RLConfig rl;
    BudgetJobConfig budget;
    GenDataConfig gen_data;
};

ExperimentConfig parse_experiment_text(const std::string& text, const std::string& origin);
ExperimentConfig parse_experiment_file(const std::string& path);

/// Canonical JSON form; parse(serialize(c)) reproduces c exactly.
std::string serialize_experiment_config(const ExperimentConfig& cfg);

/// Turns a budget job into the schedules it describes (baselines once each,
/// dynamic_moe once per granularity).
std::vector<GrowthSchedule> solve_budget_job(const BudgetJobConfig& cfg);

} // namespace plastinet
