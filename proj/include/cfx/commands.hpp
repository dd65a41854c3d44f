// Pipeline commands behind the CLI: train the cloud model, run sweeps and
// ablations, plot results, and verify the one-pair linear recovery property.
// Every command resolves its artifacts under one output dir and writes a
// manifest naming them.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cfx/config.hpp"

namespace cfx {

inline constexpr const char* kToolVersion = "cfxlab 0.1.0";

// Flag-level overrides; zero/empty fields defer to the config file.
struct CliOverrides {
    std::string out_dir;        // --out-dir, else CFX_OUT_DIR, else config
    int jobs = 0;
    int runs = 0;
    std::vector<int> sizes;
    bool has_seed = false;
    std::uint64_t seed = 0;
    std::string cost_axis = "queries";  // queries | api-calls
};

// Dataset realized from a config: generated or loaded, split, and with the
// attacker's query pool rebalanced when the config says so.
struct Experiment {
    std::string id;
    Dataset dataset;
    SplitSet splits;
};

Experiment prepare_experiment(const RunConfig& cfg);

std::string resolve_out_dir(const CliOverrides& cli, const RunConfig& cfg);

// Artifact paths under an output dir, shared between writer and readers.
std::string cloud_model_path(const std::string& out_dir, const std::string& id);
std::string cloud_norm_path(const std::string& out_dir, const std::string& id);
std::string checkpoint_path(const std::string& out_dir, const std::string& id, int epoch);

// ConfigError (exit 1) for bad configuration; InputError/TrainingError
// (exit 2) for runtime failures. Progress goes to `log`.
void cmd_train_cloud(const std::string& config_path, const CliOverrides& cli,
                     std::ostream& log);
void cmd_sweep(const std::string& config_path, const CliOverrides& cli,
               std::ostream& log);
void cmd_ablate(const std::string& config_path, const std::string& ablation,
                const CliOverrides& cli, std::ostream& log);
void cmd_plot(const std::string& results_csv, const std::string& out_svg,
              const CliOverrides& cli, std::ostream& log);

struct LemmaCheckReport {
    struct Row {
        int dim = 0;
        double min_agreement = 0.0;
        double mean_agreement = 0.0;
    };
    std::vector<Row> rows;
    bool pass = false;  // every cloud in every dimension reached 0.999
};

// A single CF/CCF pair against random sharp one-layer clouds must pin the
// boundary: extracted linear models need >= 0.999 agreement on n_eval
// uniform points, for each of clouds_per_dim clouds in d = 2, 5, 10.
LemmaCheckReport lemma_check(std::uint64_t seed, int clouds_per_dim, int n_eval,
                             std::ostream* log);

// Returns false (caller exits 2) when the property fails.
bool cmd_lemma_check(std::uint64_t seed, std::ostream& log);

}  // namespace cfx
