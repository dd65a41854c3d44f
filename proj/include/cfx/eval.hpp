// Fidelity metrics, boundary/confidence diagnostics, and the multi-run
// sweep engine that produces the agreement tables behind every experiment.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cfx/cf_oracle.hpp"
#include "cfx/data.hpp"
#include "cfx/mlp.hpp"

namespace cfx {

// A model bundled with the normalizer its inputs expect. Cloud and substitute
// each carry their own; raw feature vectors are the common currency.
struct NormalizedModel {
    MlpModel model;
    Normalizer norm;

    Prediction predict(const Eigen::VectorXd& x) const {
        return forward(model, norm.apply(x));
    }
};

// Fraction of points where both models emit the same label. Symmetric.
double agreement(const NormalizedModel& a, const NormalizedModel& b,
                 const std::vector<Eigen::VectorXd>& points);

// Probe cloud for boundary comparisons on the box [lo, hi]: an inclusive
// side x side grid in 2D (seed unused there), uniform samples otherwise.
std::vector<Eigen::VectorXd> boundary_probes(const Eigen::VectorXd& lo,
                                             const Eigen::VectorXd& hi,
                                             std::uint64_t seed, int grid_side = 200,
                                             int n_samples = 10000);

// Disagreement fraction on the probes, i.e. 1 - agreement. A displacement
// proxy that stays well defined for any model pair and dimension.
double boundary_shift(const NormalizedModel& cloud, const NormalizedModel& substitute,
                      const std::vector<Eigen::VectorXd>& probes);

// Fraction of points the model is confident about: prob >= hi or <= 1 - hi.
// hi must lie in (0.5, 1).
double confidence_profile(const NormalizedModel& m,
                          const std::vector<Eigen::VectorXd>& points, double hi);

struct FeatureLeakage {
    std::vector<int> order;          // feature indices, most-changed first
    Eigen::VectorXd mean_abs_delta;  // per feature, normalized space
    bool tied = false;               // some adjacent ranks within rel 1e-9
};

// Ranks features by how much the explanations moved them on average,
// measured in normalized units so scales are comparable. All results must
// have converged.
FeatureLeakage feature_leakage_rank(const std::vector<CfResult>& results,
                                    const Normalizer& norm);

enum class Strategy { StealMl, StealMlCoreset, ModelExtraction, DualCf, DualCfx };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);  // ConfigError on unknown

struct SweepConfig {
    std::string dataset_id;
    std::vector<Strategy> strategies;
    std::vector<int> query_sizes;      // strictly ascending, positive
    int runs_per_size = 30;
    std::uint64_t base_seed = 1;
    std::vector<int> substitute_hidden;  // hidden widths of the substitute MLP
    TrainConfig train;                 // per-cell seed is derived; cfg value ignored
    CfConfig cf;
    bool paired_batching = true;       // CF/CCF pairs share a mini-batch
    int jobs = 1;

    void validate() const;  // ConfigError on violations
};

struct SweepRecord {
    std::string dataset;
    std::string strategy;
    int query_size = 0;
    std::uint64_t run_seed = 0;
    double agreement = 0.0;
    long long api_calls = 0;
    int dropped_pairs = 0;
};

struct SweepAggregate {
    std::string dataset;
    std::string strategy;
    int query_size = 0;
    double mean_agreement = 0.0;
    double std_agreement = 0.0;  // population std over the runs
    double mean_api_calls = 0.0;
};

struct ResultTable {
    std::vector<SweepRecord> records;
    std::vector<SweepAggregate> aggregates;
};

// Groups by (dataset, strategy, query_size) in first-appearance order.
std::vector<SweepAggregate> aggregate_records(const std::vector<SweepRecord>& records);

// The experiment engine. For every (strategy, size, run) cell: derive the
// cell seed from (base_seed, strategy, size, run), draw the queries from the
// query split (uniform without replacement; the coreset variant picks
// k-centers instead), run the attack against a fresh-metered oracle, train
// the substitute, and score agreement on the eval split. Cells are
// independent; cfg.jobs > 1 runs them on a thread pool with identical output.
ResultTable run_sweep(const SweepConfig& cfg, const MlpModel& cloud,
                      const Normalizer& cloud_norm, const SplitSet& splits);

std::string records_csv(const std::vector<SweepRecord>& records);
std::string aggregates_csv(const std::vector<SweepAggregate>& aggregates);

// One-sided paired t-test p-value for H1: mean(a - b) > 0. Degenerate zero
// spread resolves by the sign of the mean difference.
double paired_t_pvalue_greater(const std::vector<double>& a,
                               const std::vector<double>& b);

}  // namespace cfx
