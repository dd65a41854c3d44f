// One structured config file fully determines a run: dataset, cloud model,
// CF solver, attack, sweep grid, and output location. Unknown keys are
// rejected so a typo cannot silently change an experiment.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfx/cf_oracle.hpp"
#include "cfx/eval.hpp"
#include "cfx/mlp.hpp"

namespace cfx {

struct DatasetConfig {
    std::string kind = "syn_linear";  // syn_linear | syn_nonlinear | csv
    int n = 5000;                     // synthetic row count
    std::uint64_t seed = 11;          // generation seed
    std::string path;                 // csv only
    std::string label_column = "label";
    std::string positive_label = "1";
    std::uint64_t split_seed = 12;
    double rebalance_ratio = 1.0;     // majority:minority applied to the query split

    std::string id() const;  // stable tag used in artifact names and records
};

struct CloudConfig {
    std::vector<int> hidden = {10};
    TrainConfig train;                     // seed drives init + shuffle
    std::vector<int> checkpoint_epochs;    // optional mid-training snapshots
};

struct AttackConfig {
    std::vector<int> substitute_hidden = {10};
    TrainConfig train;
    bool paired_batching = true;
};

struct SweepSection {
    std::vector<Strategy> strategies = {Strategy::StealMl, Strategy::ModelExtraction,
                                        Strategy::DualCf, Strategy::DualCfx};
    std::vector<int> query_sizes = {1, 2, 4, 8, 16, 32, 64, 128};
    int runs_per_size = 30;
    std::uint64_t base_seed = 1;
    int jobs = 1;
};

struct OutputConfig {
    std::string dir = "out";
};

struct RunConfig {
    DatasetConfig dataset;
    CloudConfig cloud;
    CfConfig cf;
    AttackConfig attack;
    SweepSection sweep;
    OutputConfig output;

    void validate() const;  // ConfigError naming the offending field
};

// Strict parse: every section and key must be known, every value well typed.
// Errors carry the dotted field path.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical JSON snapshot of a parsed config (stable key order), used by
// manifests so a run records exactly what it executed.
std::string config_to_json(const RunConfig& cfg);

}  // namespace cfx
