// The simulated cloud API: a frozen model behind predict/explain endpoints,
// a counterfactual solver, and a billing meter counting every interaction.
#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cfx/data.hpp"
#include "cfx/mlp.hpp"

namespace cfx {

enum class Metric { L1, L2, L1Mad };

std::string metric_name(Metric m);
Metric metric_from_name(const std::string& name);

// L1 = sum |d_i|, L2 = sum d_i^2, L1Mad = sum |d_i| / mad_i.
double distance(const Eigen::VectorXd& x, const Eigen::VectorXd& c, Metric metric,
                const Eigen::VectorXd* mad = nullptr);

// Per-feature median(|x_i - median(x_i)|), floored at 1e-6.
Eigen::VectorXd mad_stats(const std::vector<Eigen::VectorXd>& xs);
Eigen::VectorXd mad_stats(const Dataset& reference);

struct CfConfig {
    double threshold = 0.7;          // target-class probability the CF must reach
    Metric metric = Metric::L2;
    std::optional<Eigen::VectorXd> mad;  // required iff metric == L1Mad
    double lr_cf = 0.01;
    int max_steps = 1000;            // descent steps per lambda round
    double lambda_init = 0.1;
    double lambda_growth = 10.0;
    int max_escalations = 5;
    double max_step_norm = 0.25;     // displacement cap per step, normalized units

    void validate(int dim) const;    // ConfigError on violations
};

struct CfResult {
    Eigen::VectorXd origin;       // raw feature space
    Eigen::VectorXd explanation;  // raw feature space
    int origin_label = 0;
    int cf_label = 0;
    double achieved_prob = 0.0;   // target-class probability at the explanation
    double distance = 0.0;        // under the configured metric, normalized space
    int steps_used = 0;
    bool converged = false;
};

// Frozen cloud model plus solver config. The meter is the only mutable state;
// counters are atomic so concurrent runs can share an oracle if they want to.
class CfOracle {
public:
    CfOracle(MlpModel model, Normalizer normalizer, CfConfig config);

    CfOracle(const CfOracle&) = delete;
    CfOracle& operator=(const CfOracle&) = delete;

    const MlpModel& model() const { return model_; }
    const Normalizer& normalizer() const { return normalizer_; }
    const CfConfig& config() const { return config_; }

    // Normalizes, runs the model, bills one predict call.
    Prediction predict(const Eigen::VectorXd& x) const;

    // Solves for the nearest input past the threshold on the opposite class.
    // Descent runs in normalized space starting at x, stops at the first
    // iterate with p_target >= threshold (refined along the crossing step),
    // escalating lambda after each exhausted round. Bills one explain call.
    CfResult explain(const Eigen::VectorXd& x) const;

    // CF of the query, then CF of that CF. Bills two explain calls.
    std::pair<CfResult, CfResult> explain_of_explain(const Eigen::VectorXd& x) const;

    long long predict_calls() const { return predict_calls_.load(); }
    long long explain_calls() const { return explain_calls_.load(); }

private:
    MlpModel model_;
    Normalizer normalizer_;
    CfConfig config_;
    mutable std::atomic<long long> predict_calls_{0};
    mutable std::atomic<long long> explain_calls_{0};
};

// origin features, explanation features, labels, achieved_prob, distance,
// steps, converged; one row per result.
std::string cf_results_csv(const std::vector<CfResult>& results,
                           const std::vector<std::string>& feature_names);

}  // namespace cfx
