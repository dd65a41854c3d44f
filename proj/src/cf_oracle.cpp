#include "cfx/cf_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cfx/error.hpp"

namespace cfx {

std::string metric_name(Metric m) {
    switch (m) {
        case Metric::L1: return "L1";
        case Metric::L2: return "L2";
        case Metric::L1Mad: return "L1_MAD";
    }
    return "?";
}

Metric metric_from_name(const std::string& name) {
    if (name == "L1") return Metric::L1;
    if (name == "L2") return Metric::L2;
    if (name == "L1_MAD") return Metric::L1Mad;
    throw ConfigError("unknown metric '" + name + "' (expected L1, L2 or L1_MAD)");
}

static void check_mad(const Eigen::VectorXd* mad, Eigen::Index dim) {
    if (mad == nullptr)
        throw InputError("L1_MAD metric requires a MAD vector");
    if (mad->size() != dim)
        throw InputError("MAD vector has dimension " + std::to_string(mad->size()) +
                         ", expected " + std::to_string(dim));
    if ((mad->array() <= 0.0).any())
        throw InputError("MAD entries must be positive");
}

double distance(const Eigen::VectorXd& x, const Eigen::VectorXd& c, Metric metric,
                const Eigen::VectorXd* mad) {
    if (x.size() != c.size())
        throw InputError("distance: dimension mismatch");
    Eigen::VectorXd d = x - c;
    switch (metric) {
        case Metric::L1: return d.cwiseAbs().sum();
        case Metric::L2: return d.squaredNorm();
        case Metric::L1Mad:
            check_mad(mad, x.size());
            return d.cwiseAbs().cwiseQuotient(*mad).sum();
    }
    return 0.0;
}

// Gradient of distance(u, c) with respect to c.
static Eigen::VectorXd distance_grad(const Eigen::VectorXd& u, const Eigen::VectorXd& c,
                                     Metric metric, const Eigen::VectorXd* mad) {
    Eigen::VectorXd d = c - u;
    auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
    switch (metric) {
        case Metric::L1: return d.unaryExpr(sign);
        case Metric::L2: return 2.0 * d;
        case Metric::L1Mad: return d.unaryExpr(sign).cwiseQuotient(*mad);
    }
    return Eigen::VectorXd::Zero(d.size());
}

static double median_inplace(std::vector<double>& v) {
    std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Eigen::VectorXd mad_stats(const std::vector<Eigen::VectorXd>& xs) {
    if (xs.empty()) throw InputError("mad_stats: empty reference");
    const Eigen::Index d = xs[0].size();
    Eigen::VectorXd out(d);
    std::vector<double> col(xs.size());
    for (Eigen::Index j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (xs[i].size() != d) throw InputError("mad_stats: ragged reference rows");
            col[i] = xs[i][j];
        }
        double med = median_inplace(col);
        for (double& v : col) v = std::fabs(v - med);
        out[j] = std::max(median_inplace(col), 1e-6);
    }
    return out;
}

Eigen::VectorXd mad_stats(const Dataset& reference) {
    reference.validate();
    return mad_stats(reference.xs);
}

void CfConfig::validate(int dim) const {
    if (!(threshold > 0.5 && threshold < 1.0))
        throw ConfigError("cf threshold must be in (0.5, 1)");
    if (!(lr_cf > 0.0)) throw ConfigError("lr_cf must be > 0");
    if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
    if (!(lambda_init > 0.0)) throw ConfigError("lambda_init must be > 0");
    if (!(lambda_growth > 1.0)) throw ConfigError("lambda_growth must be > 1");
    if (max_escalations < 0) throw ConfigError("max_escalations must be >= 0");
    if (!(max_step_norm > 0.0)) throw ConfigError("max_step_norm must be > 0");
    if (metric == Metric::L1Mad) {
        if (!mad.has_value())
            throw ConfigError("metric L1_MAD requires a mad vector");
        if (dim > 0 && mad->size() != dim)
            throw ConfigError("mad vector has dimension " + std::to_string(mad->size()) +
                              ", expected " + std::to_string(dim));
        if ((mad->array() <= 0.0).any())
            throw ConfigError("mad entries must be positive");
    } else if (mad.has_value()) {
        throw ConfigError("mad vector is only valid with metric L1_MAD");
    }
}

CfOracle::CfOracle(MlpModel model, Normalizer normalizer, CfConfig config)
    : model_(std::move(model)),
      normalizer_(std::move(normalizer)),
      config_(std::move(config)) {
    model_.validate();
    if (normalizer_.dim() != model_.input_dim)
        throw ConfigError("normalizer dimension " + std::to_string(normalizer_.dim()) +
                          " does not match model input " + std::to_string(model_.input_dim));
    config_.validate(model_.input_dim);
}

Prediction CfOracle::predict(const Eigen::VectorXd& x) const {
    Prediction p = forward(model_, normalizer_.apply(x));
    predict_calls_.fetch_add(1, std::memory_order_relaxed);
    return p;
}

CfResult CfOracle::explain(const Eigen::VectorXd& x) const {
    explain_calls_.fetch_add(1, std::memory_order_relaxed);
    Eigen::VectorXd u = normalizer_.apply(x);
    Prediction origin = forward(model_, u);
    const int target = 1 - origin.label;
    const double s = target == 1 ? 1.0 : -1.0;
    const Eigen::VectorXd* mad = config_.mad ? &*config_.mad : nullptr;

    // p_target(c) = sigmoid(s * z(c)); feasible means p_target >= threshold.
    // The hinge is driven in logit space: the threshold contour is the same,
    // but the pull does not vanish when the model is saturated far from it.
    const double margin = logit_of(config_.threshold);
    auto target_prob = [&](double z) { return sigmoid(s * z); };

    ForwardTrace trace;
    Eigen::VectorXd c = u;
    Eigen::VectorXd prev = u;
    double lambda = config_.lambda_init;
    int steps = 0;
    bool crossed = false;
    constexpr double plateau = 1e-10;

    for (int round = 0; round <= config_.max_escalations && !crossed; ++round) {
        for (int it = 0; it < config_.max_steps; ++it) {
            double z = forward_logit(model_, c, trace);
            if (target_prob(z) >= config_.threshold) {
                crossed = true;
                break;
            }
            double gap = margin - s * z;
            Eigen::VectorXd g = (-2.0 * lambda * gap * s) * grad_input_logit(model_, c) +
                                distance_grad(u, c, config_.metric, mad);
            Eigen::VectorXd step_vec = -config_.lr_cf * g;
            double norm = step_vec.norm();
            if (norm > config_.max_step_norm)
                step_vec *= config_.max_step_norm / norm;
            prev = c;
            c += step_vec;
            ++steps;
            if (step_vec.cwiseAbs().maxCoeff() < plateau) break;  // stalled; escalate
        }
        if (!crossed) lambda *= config_.lambda_growth;
    }

    if (crossed && steps > 0) {
        // Refine along the crossing step: prev is infeasible, c feasible.
        Eigen::VectorXd lo = prev, hi = c;
        for (int i = 0; i < 60; ++i) {
            Eigen::VectorXd mid = 0.5 * (lo + hi);
            double z = forward_logit(model_, mid, trace);
            if (target_prob(z) >= config_.threshold)
                hi = mid;
            else
                lo = mid;
        }
        c = hi;
    }

    Prediction final_pred = forward(model_, c);
    CfResult r;
    r.origin = x;
    r.explanation = normalizer_.inverse(c);
    r.origin_label = origin.label;
    r.cf_label = final_pred.label;
    r.achieved_prob = target_prob(final_pred.logit);
    r.distance = distance(u, c, config_.metric, mad);
    r.steps_used = steps;
    r.converged = crossed;
    return r;
}

std::pair<CfResult, CfResult> CfOracle::explain_of_explain(const Eigen::VectorXd& x) const {
    CfResult cf = explain(x);
    CfResult ccf = explain(cf.explanation);
    return {std::move(cf), std::move(ccf)};
}

std::string cf_results_csv(const std::vector<CfResult>& results,
                           const std::vector<std::string>& feature_names) {
    std::ostringstream out;
    for (const auto& n : feature_names) out << "x_" << n << ",";
    for (const auto& n : feature_names) out << "c_" << n << ",";
    out << "origin_label,cf_label,achieved_prob,distance,steps,converged\n";
    char buf[64];
    auto emit = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    const auto d = static_cast<Eigen::Index>(feature_names.size());
    for (const auto& r : results) {
        if (r.origin.size() != d || r.explanation.size() != d)
            throw InputError("cf_results_csv: feature name count does not match results");
        for (Eigen::Index j = 0; j < d; ++j) {
            emit(r.origin[j]);
            out << ",";
        }
        for (Eigen::Index j = 0; j < d; ++j) {
            emit(r.explanation[j]);
            out << ",";
        }
        out << r.origin_label << "," << r.cf_label << ",";
        emit(r.achieved_prob);
        out << ",";
        emit(r.distance);
        out << "," << r.steps_used << "," << (r.converged ? 1 : 0) << "\n";
    }
    return out.str();
}

}  // namespace cfx
