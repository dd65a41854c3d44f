// Acceptance gate: one binary, one printed PASS/FAIL line per criterion.
// Builds both synthetic clouds once, then drives every headline property of
// the extraction lab against them with pinned tolerances.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "cfx/attacks.hpp"
#include "cfx/cf_oracle.hpp"
#include "cfx/commands.hpp"
#include "cfx/data.hpp"
#include "cfx/error.hpp"
#include "cfx/eval.hpp"
#include "cfx/linear_extract.hpp"
#include "cfx/mlp.hpp"
#include "cfx/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int hw_jobs() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[192];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c);
    return buf;
}

// One trained synthetic cloud with everything the criteria need.
struct CloudBundle {
    std::string id;
    cfx::Dataset data;
    cfx::SplitSet splits;
    cfx::Normalizer norm;
    cfx::MlpModel model;
    cfx::MlpModel ckpt25, ckpt100;  // Syn-Nonlinear only
    std::vector<int> hidden;
    cfx::TrainConfig train;
};

CloudBundle make_cloud(bool nonlinear) {
    CloudBundle b;
    b.id = nonlinear ? "syn_nonlinear" : "syn_linear";
    b.data = nonlinear ? cfx::gen_syn_nonlinear(5000, 13) : cfx::gen_syn_linear(5000, 11);
    b.splits = cfx::split_dataset(b.data, nonlinear ? 14 : 12);
    b.norm = cfx::fit_normalizer(b.splits.train);
    b.hidden = nonlinear ? std::vector<int>{20, 10} : std::vector<int>{10};
    b.train.learning_rate = 0.005;
    b.train.batch_size = 32;
    b.train.epochs = nonlinear ? 500 : 200;
    b.train.seed = nonlinear ? 22 : 21;

    std::vector<Eigen::VectorXd> xs;
    xs.reserve(b.splits.train.size());
    for (const auto& x : b.splits.train.xs) xs.push_back(b.norm.apply(x));

    cfx::MlpArch arch = cfx::make_binary_arch(2, b.hidden);
    cfx::MlpModel model = cfx::mlp_init(arch, cfx::seed_mix(b.train.seed, "init"));
    cfx::EpochCallback snap = [&](int epoch, const cfx::MlpModel& m, double) {
        if (!nonlinear) return;
        if (epoch == 25) b.ckpt25 = m;
        if (epoch == 100) b.ckpt100 = m;
    };
    b.model = cfx::train(std::move(model), xs, b.splits.train.ys, b.train, snap);
    return b;
}

cfx::SweepConfig sweep_base(const CloudBundle& b) {
    cfx::SweepConfig sc;
    sc.dataset_id = b.id;
    sc.substitute_hidden = b.hidden;  // substitute mirrors the cloud by default
    sc.train = b.train;
    sc.runs_per_size = 30;
    sc.base_seed = 1;
    sc.jobs = hw_jobs();
    return sc;
}

const cfx::SweepAggregate& agg_of(const cfx::ResultTable& t, const std::string& strategy,
                                  int size) {
    for (const auto& a : t.aggregates) {
        if (a.strategy == strategy && a.query_size == size) return a;
    }
    throw cfx::InputError("missing aggregate " + strategy + "/" + std::to_string(size));
}

std::vector<double> agreements_of(const cfx::ResultTable& t, const std::string& strategy) {
    std::vector<double> out;
    for (const auto& r : t.records) {
        if (r.strategy == strategy) out.push_back(r.agreement);
    }
    return out;
}

// ---- criterion harness ----

struct Row {
    int id;
    bool pass;
    double seconds;
    std::string detail;
};

std::vector<Row> rows;

void run_criterion(int id, const std::function<bool(std::string&)>& body) {
    Row row;
    row.id = id;
    auto t0 = Clock::now();
    try {
        row.pass = body(row.detail);
    } catch (const std::exception& e) {
        row.pass = false;
        row.detail = std::string("exception: ") + e.what();
    }
    row.seconds = elapsed(t0);
    rows.push_back(row);
    std::printf("criterion %2d: %s  %6.2fs  %s\n", row.id, row.pass ? "PASS" : "FAIL",
                row.seconds, row.detail.c_str());
    std::fflush(stdout);
}

}  // namespace

int main() {
    std::printf("cfxlab acceptance suite\n");
    auto setup0 = Clock::now();
    CloudBundle lin = make_cloud(false);
    CloudBundle non = make_cloud(true);
    {
        std::vector<Eigen::VectorXd> lx, nx;
        for (const auto& x : lin.splits.train.xs) lx.push_back(lin.norm.apply(x));
        for (const auto& x : non.splits.train.xs) nx.push_back(non.norm.apply(x));
        std::printf("setup: clouds trained in %.2fs (train acc %.4f / %.4f)\n",
                    elapsed(setup0), cfx::train_accuracy(lin.model, lx, lin.splits.train.ys),
                    cfx::train_accuracy(non.model, nx, non.splits.train.ys));
    }

    // 1. One CF/CCF pair recovers a random linear cloud to >= 0.999 agreement.
    run_criterion(1, [&](std::string& detail) {
        auto t0 = Clock::now();
        cfx::LemmaCheckReport rep = cfx::lemma_check(101, 20, 10000, nullptr);
        double worst = 1.0;
        for (const auto& r : rep.rows) worst = std::min(worst, r.min_agreement);
        double secs = elapsed(t0);
        detail = fmt("min agreement %.5f over d={2,5,10}, %.2fs (budget 5s)", worst, secs);
        return rep.pass && secs < 5.0;
    });

    // 2. CF validity on 1000 uniform queries per cloud.
    run_criterion(2, [&](std::string& detail) {
        auto t0 = Clock::now();
        int worst_converged = 1000;
        bool all_valid = true;
        for (const CloudBundle* b : {&lin, &non}) {
            cfx::CfConfig cfg;  // defaults: threshold 0.7
            cfx::CfOracle oracle(b->model, b->norm, cfg);
            cfx::SplitMix64 rng(cfx::seed_mix(202, "queries", b == &non));
            int converged = 0;
            for (int i = 0; i < 1000; ++i) {
                Eigen::VectorXd x(2);
                x << rng.uniform(0.0, 6.0), rng.uniform(0.0, 6.0);
                cfx::CfResult r = oracle.explain(x);
                if (!r.converged) continue;
                ++converged;
                if (!(r.achieved_prob >= cfg.threshold) ||
                    r.cf_label != 1 - r.origin_label)
                    all_valid = false;
            }
            worst_converged = std::min(worst_converged, converged);
        }
        double secs = elapsed(t0);
        detail = fmt("worst convergence %.0f/1000, all converged valid=%.0f, %.2fs "
                     "(budget 30s)",
                     worst_converged, all_valid ? 1 : 0, secs);
        return worst_converged >= 990 && all_valid && secs < 30.0;
    });

    // 3. Parameter and input gradients vs central finite differences.
    run_criterion(3, [&](std::string& detail) {
        auto t0 = Clock::now();
        const double h = 1e-5, tol = 1e-4;
        double worst = 0.0;
        auto rel = [](double a, double b) {
            return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-7});
        };
        for (int k = 0; k < 50; ++k) {
            cfx::SplitMix64 rng(cfx::seed_mix(303, "fd", k));
            int dim = 2 + static_cast<int>(rng.next_below(3));
            std::vector<int> hidden;
            int depth = 1 + static_cast<int>(rng.next_below(2));
            for (int l = 0; l < depth; ++l)
                hidden.push_back(2 + static_cast<int>(rng.next_below(5)));
            cfx::MlpModel m =
                cfx::mlp_init(cfx::make_binary_arch(dim, hidden), rng.next_u64());
            // Random biases keep every ReLU off its kink, where central
            // differences and the subgradient legitimately disagree.
            for (auto& layer : m.layers)
                for (int r = 0; r < layer.b.size(); ++r)
                    layer.b[r] = rng.uniform(-0.3, 0.3);

            int n = 3 + static_cast<int>(rng.next_below(3));
            std::vector<Eigen::VectorXd> xs(n, Eigen::VectorXd(dim));
            std::vector<int> ys(n);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < dim; ++j) xs[i][j] = rng.uniform(-2.0, 2.0);
                ys[i] = static_cast<int>(rng.next_below(2));
            }
            auto loss_of = [&](const cfx::MlpModel& model) {
                std::vector<double> probs;
                for (const auto& x : xs) probs.push_back(cfx::forward(model, x).prob);
                return cfx::bce_loss(probs, ys);
            };

            cfx::GradTensors g = cfx::grad_params(m, xs, ys);
            for (std::size_t l = 0; l < m.layers.size(); ++l) {
                for (int r = 0; r < m.layers[l].W.rows(); ++r) {
                    for (int c = 0; c < m.layers[l].W.cols(); ++c) {
                        cfx::MlpModel up = m, dn = m;
                        up.layers[l].W(r, c) += h;
                        dn.layers[l].W(r, c) -= h;
                        double fd = (loss_of(up) - loss_of(dn)) / (2 * h);
                        worst = std::max(worst, rel(fd, g.dW[l](r, c)));
                    }
                    cfx::MlpModel up = m, dn = m;
                    up.layers[l].b[r] += h;
                    dn.layers[l].b[r] -= h;
                    double fd = (loss_of(up) - loss_of(dn)) / (2 * h);
                    worst = std::max(worst, rel(fd, g.db[l][r]));
                }
            }

            Eigen::VectorXd gi = cfx::grad_input(m, xs[0], 1);
            for (int j = 0; j < dim; ++j) {
                Eigen::VectorXd up = xs[0], dn = xs[0];
                up[j] += h;
                dn[j] -= h;
                double fd =
                    (cfx::forward(m, up).prob - cfx::forward(m, dn).prob) / (2 * h);
                worst = std::max(worst, rel(fd, gi[j]));
            }
        }
        double secs = elapsed(t0);
        detail = fmt("worst relative error %.2e over 50 models, %.2fs (budget 10s)",
                     worst, secs);
        return worst <= tol && secs < 10.0;
    });

    // 4 + 5 share one 30-run sweep per dataset.
    std::vector<cfx::ResultTable> ordering_tables;
    run_criterion(4, [&](std::string& detail) {
        auto t0 = Clock::now();
        bool ordering = true, cfx_close = true;
        double worst_p = 0.0, min_gap = 1.0, worst_deficit = 1.0;
        std::string worst_cell = "-";
        for (const CloudBundle* b : {&lin, &non}) {
            cfx::SweepConfig sc = sweep_base(*b);
            sc.strategies = {cfx::Strategy::StealMl, cfx::Strategy::DualCf,
                             cfx::Strategy::DualCfx};
            sc.query_sizes = {1, 2, 4, 8};
            cfx::ResultTable t = cfx::run_sweep(sc, b->model, b->norm, b->splits);
            ordering_tables.push_back(t);
            for (int size : sc.query_sizes) {
                double steal = agg_of(t, "steal_ml", size).mean_agreement;
                double dual = agg_of(t, "dual_cf", size).mean_agreement;
                double dualx = agg_of(t, "dual_cfx", size).mean_agreement;
                min_gap = std::min(min_gap, dual - steal);
                if (!(dual > steal)) ordering = false;
                if (dualx - dual < worst_deficit) {
                    worst_deficit = dualx - dual;
                    worst_cell = b->id + "@" + std::to_string(size);
                }
                if (!(dualx >= dual - 0.02)) cfx_close = false;
            }
            double p = cfx::paired_t_pvalue_greater(agreements_of(t, "dual_cf"),
                                                    agreements_of(t, "steal_ml"));
            worst_p = std::max(worst_p, p);
        }
        double secs = elapsed(t0);
        detail = fmt("min dual-steal gap %.4f, worst p %.2e", min_gap, worst_p) +
                 fmt(", dual_cfx-dual_cf %.4f", worst_deficit) + " at " + worst_cell +
                 fmt(" (>= -0.02), %.1fs (budget 600s)", secs);
        return ordering && cfx_close && worst_p < 0.05 && secs < 600.0;
    });

    run_criterion(5, [&](std::string& detail) {
        if (ordering_tables.size() != 2) {
            detail = "criterion 4 sweep unavailable";
            return false;
        }
        double worst_margin = -1.0;
        std::string worst_cell = "-";
        bool stable = true;
        for (const auto& t : ordering_tables) {
            for (int size : {1, 2, 4, 8}) {
                double ds = agg_of(t, "dual_cf", size).std_agreement;
                double ss = agg_of(t, "steal_ml", size).std_agreement;
                if (ds - ss > worst_margin) {
                    worst_margin = ds - ss;
                    worst_cell = t.records.front().dataset + "@" + std::to_string(size);
                }
                if (ds > ss) stable = false;
            }
        }
        detail = fmt("max std(dual)-std(steal) %.4f", worst_margin) + " at " + worst_cell +
                 " (<= 0 required)";
        return stable;
    });

    // 6. Boundary shift with one query: Model Extraction vs DualCF on Syn-Linear.
    run_criterion(6, [&](std::string& detail) {
        Eigen::VectorXd lo = Eigen::VectorXd::Zero(2);
        Eigen::VectorXd hi = Eigen::VectorXd::Constant(2, 6.0);
        auto probes = cfx::boundary_probes(lo, hi, 0);
        cfx::NormalizedModel cloud{lin.model, lin.norm};
        cfx::Normalizer sub_norm = cfx::fit_normalizer(lin.splits.query);
        cfx::MlpArch arch = cfx::make_binary_arch(2, lin.hidden);

        double me_sum = 0.0, dual_sum = 0.0;
        for (int k = 0; k < 30; ++k) {
            std::uint64_t seed = cfx::seed_mix(606, "shift", k);
            cfx::SplitMix64 rng(seed);
            const Eigen::VectorXd& q =
                lin.splits.query.xs[rng.next_below(lin.splits.query.size())];

            cfx::CfOracle oracle(lin.model, lin.norm, cfx::CfConfig{});
            for (bool dual : {false, true}) {
                cfx::SubstituteTrainingSet set =
                    dual ? cfx::dual_cf(oracle, {q}, false)
                         : cfx::model_extraction(oracle, {q});
                cfx::TrainConfig tc = lin.train;
                tc.seed = cfx::seed_mix(seed, "train", dual);
                cfx::MlpModel sub;
                if (set.xs.empty()) {
                    sub = cfx::mlp_init(arch, cfx::seed_mix(tc.seed, "init"));
                } else {
                    for (auto& x : set.xs) x = sub_norm.apply(x);
                    sub = cfx::train_substitute(set, arch, tc, true);
                }
                double shift = cfx::boundary_shift(cloud, {std::move(sub), sub_norm}, probes);
                (dual ? dual_sum : me_sum) += shift;
            }
        }
        detail = fmt("mean shift: model_extraction %.4f vs dual_cf %.4f over 30 seeds",
                     me_sum / 30, dual_sum / 30);
        return me_sum > dual_sum;
    });

    // 7. Over-confidence grows between checkpoints on Syn-Nonlinear.
    run_criterion(7, [&](std::string& detail) {
        cfx::NormalizedModel early{non.ckpt25, non.norm};
        cfx::NormalizedModel late{non.ckpt100, non.norm};
        double f25 = cfx::confidence_profile(early, non.splits.train.xs, 0.9);
        double f100 = cfx::confidence_profile(late, non.splits.train.xs, 0.9);
        detail = fmt("confident fraction: epoch 25 %.4f -> epoch 100 %.4f", f25, f100);
        return f100 > f25;
    });

    // 8. Threshold insensitivity of DualCF at 8 queries.
    run_criterion(8, [&](std::string& detail) {
        double worst_spread = 0.0;
        for (const CloudBundle* b : {&lin, &non}) {
            double lo = 1.0, hi = 0.0;
            for (double eps : {0.6, 0.7, 0.8, 0.9}) {
                cfx::SweepConfig sc = sweep_base(*b);
                sc.strategies = {cfx::Strategy::DualCf};
                sc.query_sizes = {8};
                sc.cf.threshold = eps;
                cfx::ResultTable t = cfx::run_sweep(sc, b->model, b->norm, b->splits);
                double mean = agg_of(t, "dual_cf", 8).mean_agreement;
                lo = std::min(lo, mean);
                hi = std::max(hi, mean);
            }
            worst_spread = std::max(worst_spread, hi - lo);
        }
        detail = fmt("max mean-agreement spread across eps {0.6..0.9}: %.4f (<= 0.05)",
                     worst_spread);
        return worst_spread <= 0.05;
    });

    // 9. Paired batching never loses to shuffled DualCF on Syn-Nonlinear.
    run_criterion(9, [&](std::string& detail) {
        cfx::ResultTable paired, shuffled;
        for (bool pair : {true, false}) {
            cfx::SweepConfig sc = sweep_base(non);
            sc.strategies = {cfx::Strategy::DualCf};
            sc.query_sizes = {1, 2, 4, 8};
            sc.paired_batching = pair;
            (pair ? paired : shuffled) = cfx::run_sweep(sc, non.model, non.norm, non.splits);
        }
        double worst = 1.0;
        bool ok = true;
        for (int size : {1, 2, 4, 8}) {
            double p = agg_of(paired, "dual_cf", size).mean_agreement;
            double s = agg_of(shuffled, "dual_cf", size).mean_agreement;
            worst = std::min(worst, p - s);
            if (p < s) ok = false;
        }
        detail = fmt("min paired-shuffled mean gap %.4f (>= 0 required)", worst);
        return ok;
    });

    // 10. Capacity insensitivity across the four substitute variants at 32 queries.
    run_criterion(10, [&](std::string& detail) {
        const int last = non.hidden.back();
        std::vector<std::vector<int>> variants = {
            non.hidden,                      // base
            {non.hidden[0], last / 2},       // remove half the last layer
            {non.hidden[0], last + last / 2},  // add half again
            {non.hidden[0], last, last},     // one more layer
        };
        double lo = 1.0, hi = 0.0;
        for (const auto& hidden : variants) {
            cfx::SweepConfig sc = sweep_base(non);
            sc.strategies = {cfx::Strategy::DualCf};
            sc.query_sizes = {32};
            sc.substitute_hidden = hidden;
            cfx::ResultTable t = cfx::run_sweep(sc, non.model, non.norm, non.splits);
            double mean = agg_of(t, "dual_cf", 32).mean_agreement;
            lo = std::min(lo, mean);
            hi = std::max(hi, mean);
        }
        detail = fmt("mean agreement across capacity variants in [%.4f, %.4f], "
                     "spread %.4f (<= 0.05)",
                     lo, hi, hi - lo);
        return hi - lo <= 0.05;
    });

    // 11. Byte-identical CSVs on rerun, serial or threaded.
    run_criterion(11, [&](std::string& detail) {
        cfx::SweepConfig sc = sweep_base(lin);
        sc.strategies = {cfx::Strategy::StealMl, cfx::Strategy::DualCf};
        sc.query_sizes = {2, 4};
        sc.runs_per_size = 3;
        cfx::ResultTable a = cfx::run_sweep(sc, lin.model, lin.norm, lin.splits);
        cfx::ResultTable b = cfx::run_sweep(sc, lin.model, lin.norm, lin.splits);
        cfx::SweepConfig serial = sc;
        serial.jobs = 1;
        cfx::ResultTable c = cfx::run_sweep(serial, lin.model, lin.norm, lin.splits);
        bool same = cfx::records_csv(a.records) == cfx::records_csv(b.records) &&
                    cfx::aggregates_csv(a.aggregates) == cfx::aggregates_csv(b.aggregates) &&
                    cfx::records_csv(a.records) == cfx::records_csv(c.records);
        detail = same ? "rerun and serial/threaded CSVs byte-identical"
                      : "CSV outputs differ between reruns";
        return same;
    });

    int passed = 0;
    for (const auto& r : rows) passed += r.pass ? 1 : 0;
    std::printf("acceptance: %d/%zu criteria passed\n", passed, rows.size());
    return passed == static_cast<int>(rows.size()) ? 0 : 1;
}
