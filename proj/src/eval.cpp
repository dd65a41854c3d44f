#include "cfx/eval.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <utility>

#include "cfx/attacks.hpp"
#include "cfx/error.hpp"
#include "cfx/rng.hpp"

namespace cfx {

namespace {

void check_points(const std::vector<Eigen::VectorXd>& points, const char* who) {
    if (points.empty()) throw InputError(std::string(who) + ": no points");
}

std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

double agreement(const NormalizedModel& a, const NormalizedModel& b,
                 const std::vector<Eigen::VectorXd>& points) {
    check_points(points, "agreement");
    long same = 0;
    for (const auto& x : points) {
        if (a.predict(x).label == b.predict(x).label) ++same;
    }
    return static_cast<double>(same) / static_cast<double>(points.size());
}

std::vector<Eigen::VectorXd> boundary_probes(const Eigen::VectorXd& lo,
                                             const Eigen::VectorXd& hi,
                                             std::uint64_t seed, int grid_side,
                                             int n_samples) {
    const Eigen::Index d = lo.size();
    if (d == 0 || hi.size() != d) throw InputError("boundary_probes: bad box");
    for (Eigen::Index j = 0; j < d; ++j) {
        if (!(lo[j] < hi[j])) throw InputError("boundary_probes: lo must be < hi");
    }
    std::vector<Eigen::VectorXd> probes;
    if (d == 2) {
        if (grid_side < 2) throw InputError("boundary_probes: grid_side must be >= 2");
        probes.reserve(static_cast<std::size_t>(grid_side) * grid_side);
        for (int i = 0; i < grid_side; ++i) {
            double x1 = lo[0] + (hi[0] - lo[0]) * i / (grid_side - 1);
            for (int j = 0; j < grid_side; ++j) {
                double x2 = lo[1] + (hi[1] - lo[1]) * j / (grid_side - 1);
                Eigen::VectorXd p(2);
                p << x1, x2;
                probes.push_back(std::move(p));
            }
        }
        return probes;
    }
    if (n_samples < 1) throw InputError("boundary_probes: n_samples must be >= 1");
    SplitMix64 rng(seed);
    probes.reserve(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        Eigen::VectorXd p(d);
        for (Eigen::Index j = 0; j < d; ++j) p[j] = rng.uniform(lo[j], hi[j]);
        probes.push_back(std::move(p));
    }
    return probes;
}

double boundary_shift(const NormalizedModel& cloud, const NormalizedModel& substitute,
                      const std::vector<Eigen::VectorXd>& probes) {
    return 1.0 - agreement(cloud, substitute, probes);
}

double confidence_profile(const NormalizedModel& m,
                          const std::vector<Eigen::VectorXd>& points, double hi) {
    if (!(hi > 0.5 && hi < 1.0))
        throw InputError("confidence_profile: hi must lie in (0.5, 1)");
    check_points(points, "confidence_profile");
    long confident = 0;
    for (const auto& x : points) {
        double p = m.predict(x).prob;
        if (p >= hi || p <= 1.0 - hi) ++confident;
    }
    return static_cast<double>(confident) / static_cast<double>(points.size());
}

FeatureLeakage feature_leakage_rank(const std::vector<CfResult>& results,
                                    const Normalizer& norm) {
    if (results.empty()) throw InputError("feature_leakage_rank: no results");
    const Eigen::Index d = norm.mean.size();
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
    for (const auto& r : results) {
        if (!r.converged)
            throw InputError("feature_leakage_rank: results must all have converged");
        if (r.origin.size() != d || r.explanation.size() != d)
            throw InputError("feature_leakage_rank: dimension mismatch");
        acc += (norm.apply(r.explanation) - norm.apply(r.origin)).cwiseAbs();
    }
    FeatureLeakage out;
    out.mean_abs_delta = acc / static_cast<double>(results.size());
    out.order.resize(d);
    std::iota(out.order.begin(), out.order.end(), 0);
    std::stable_sort(out.order.begin(), out.order.end(), [&](int a, int b) {
        return out.mean_abs_delta[a] > out.mean_abs_delta[b];
    });
    for (Eigen::Index i = 0; i + 1 < d; ++i) {
        double a = out.mean_abs_delta[out.order[i]];
        double b = out.mean_abs_delta[out.order[i + 1]];
        if (a - b <= 1e-9 * std::max({a, b, 1e-300})) out.tied = true;
    }
    return out;
}

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::StealMl: return "steal_ml";
        case Strategy::StealMlCoreset: return "steal_ml_coreset";
        case Strategy::ModelExtraction: return "model_extraction";
        case Strategy::DualCf: return "dual_cf";
        case Strategy::DualCfx: return "dual_cfx";
    }
    throw InputError("strategy_name: bad enum value");
}

Strategy strategy_from_name(const std::string& name) {
    for (Strategy s : {Strategy::StealMl, Strategy::StealMlCoreset,
                       Strategy::ModelExtraction, Strategy::DualCf, Strategy::DualCfx}) {
        if (strategy_name(s) == name) return s;
    }
    throw ConfigError("unknown strategy '" + name + "'");
}

void SweepConfig::validate() const {
    if (dataset_id.empty()) throw ConfigError("sweep: dataset_id is empty");
    if (strategies.empty()) throw ConfigError("sweep: no strategies");
    if (query_sizes.empty()) throw ConfigError("sweep: no query sizes");
    for (std::size_t i = 0; i < query_sizes.size(); ++i) {
        if (query_sizes[i] <= 0)
            throw ConfigError("sweep: query sizes must be positive");
        if (i > 0 && query_sizes[i] <= query_sizes[i - 1])
            throw ConfigError("sweep: query sizes must be strictly ascending");
    }
    if (runs_per_size < 1) throw ConfigError("sweep: runs_per_size must be >= 1");
    for (int w : substitute_hidden) {
        if (w < 1) throw ConfigError("sweep: substitute hidden widths must be positive");
    }
    if (jobs < 1) throw ConfigError("sweep: jobs must be >= 1");
    train.validate();
}

std::vector<SweepAggregate> aggregate_records(const std::vector<SweepRecord>& records) {
    struct Group {
        SweepAggregate agg;
        std::vector<double> agreements;
        double api_sum = 0.0;
    };
    std::vector<Group> groups;
    for (const auto& r : records) {
        Group* g = nullptr;
        for (auto& cand : groups) {
            if (cand.agg.dataset == r.dataset && cand.agg.strategy == r.strategy &&
                cand.agg.query_size == r.query_size) {
                g = &cand;
                break;
            }
        }
        if (!g) {
            groups.emplace_back();
            g = &groups.back();
            g->agg.dataset = r.dataset;
            g->agg.strategy = r.strategy;
            g->agg.query_size = r.query_size;
        }
        g->agreements.push_back(r.agreement);
        g->api_sum += static_cast<double>(r.api_calls);
    }
    std::vector<SweepAggregate> out;
    out.reserve(groups.size());
    for (auto& g : groups) {
        const double n = static_cast<double>(g.agreements.size());
        double mean = std::accumulate(g.agreements.begin(), g.agreements.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : g.agreements) ss += (v - mean) * (v - mean);
        g.agg.mean_agreement = mean;
        g.agg.std_agreement = std::sqrt(ss / n);
        g.agg.mean_api_calls = g.api_sum / n;
        out.push_back(std::move(g.agg));
    }
    return out;
}

ResultTable run_sweep(const SweepConfig& cfg, const MlpModel& cloud,
                      const Normalizer& cloud_norm, const SplitSet& splits) {
    cfg.validate();
    cloud.validate();
    splits.query.validate();
    splits.eval.validate();
    const int dim = splits.query.dim();
    if (cloud.input_dim != dim)
        throw InputError("run_sweep: cloud model dimension disagrees with the data");
    if (cloud_norm.dim() != dim)
        throw InputError("run_sweep: cloud normalizer dimension disagrees with the data");
    cfg.cf.validate(dim);
    if (cfg.query_sizes.back() > static_cast<int>(splits.query.size()))
        throw InputError("run_sweep: query_size " + std::to_string(cfg.query_sizes.back()) +
                         " exceeds the query split size " +
                         std::to_string(splits.query.size()));

    // The attacker's normalizer is fit once on its whole query pool so the
    // feature scaling does not wobble with the sampled subset.
    const Normalizer sub_norm = fit_normalizer(splits.query);
    std::vector<Eigen::VectorXd> pool_n;
    pool_n.reserve(splits.query.size());
    for (const auto& x : splits.query.xs) pool_n.push_back(sub_norm.apply(x));

    const MlpArch arch = make_binary_arch(dim, cfg.substitute_hidden);
    const std::size_t n_sizes = cfg.query_sizes.size();
    const std::size_t runs = static_cast<std::size_t>(cfg.runs_per_size);
    const std::size_t n_cells = cfg.strategies.size() * n_sizes * runs;

    ResultTable table;
    table.records.resize(n_cells);

    auto run_cell = [&](std::size_t idx) {
        const std::size_t si = idx / (n_sizes * runs);
        const std::size_t qi = (idx / runs) % n_sizes;
        const std::size_t run = idx % runs;
        const Strategy strat = cfg.strategies[si];
        const std::string name = strategy_name(strat);
        const int size = cfg.query_sizes[qi];
        const std::uint64_t cell_seed =
            seed_mix(seed_mix(cfg.base_seed, name), "cell",
                     static_cast<std::uint64_t>(size), run);

        std::vector<int> picks;
        if (strat == Strategy::StealMlCoreset) {
            picks = coreset_select_indices(pool_n, static_cast<std::size_t>(size),
                                           seed_mix(cell_seed, "coreset"));
        } else {
            SplitMix64 rng(seed_mix(cell_seed, "queries"));
            picks = sample_without_replacement(splits.query.size(),
                                               static_cast<std::size_t>(size), rng);
        }
        std::vector<Eigen::VectorXd> queries;
        queries.reserve(picks.size());
        for (int i : picks) queries.push_back(splits.query.xs[i]);

        CfOracle oracle(cloud, cloud_norm, cfg.cf);
        SubstituteTrainingSet set;
        switch (strat) {
            case Strategy::StealMl:
            case Strategy::StealMlCoreset:
                set = steal_ml(oracle, queries);
                break;
            case Strategy::ModelExtraction:
                set = model_extraction(oracle, queries);
                break;
            case Strategy::DualCf:
                set = dual_cf(oracle, queries, false);
                break;
            case Strategy::DualCfx:
                set = dual_cf(oracle, queries, true);
                break;
        }

        TrainConfig tc = cfg.train;
        tc.seed = seed_mix(cell_seed, "train");
        MlpModel sub;
        if (set.xs.empty()) {
            // Every pair dropped: the attacker has nothing to fit, so it is
            // left holding the untrained substitute.
            sub = mlp_init(arch, seed_mix(tc.seed, "init"));
        } else {
            SubstituteTrainingSet normalized = set;
            for (auto& x : normalized.xs) x = sub_norm.apply(x);
            sub = train_substitute(normalized, arch, tc, cfg.paired_batching);
        }

        SweepRecord& rec = table.records[idx];
        rec.dataset = cfg.dataset_id;
        rec.strategy = name;
        rec.query_size = size;
        rec.run_seed = cell_seed;
        rec.agreement = agreement({cloud, cloud_norm}, {std::move(sub), sub_norm},
                                  splits.eval.xs);
        rec.api_calls = oracle.predict_calls() + oracle.explain_calls();
        rec.dropped_pairs = set.dropped_pairs;
    };

    if (cfg.jobs == 1 || n_cells <= 1) {
        for (std::size_t i = 0; i < n_cells; ++i) run_cell(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto worker = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n_cells) return;
                try {
                    run_cell(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> threads;
        const std::size_t n_threads =
            std::min(static_cast<std::size_t>(cfg.jobs), n_cells);
        threads.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    table.aggregates = aggregate_records(table.records);
    return table;
}

std::string records_csv(const std::vector<SweepRecord>& records) {
    std::ostringstream out;
    out << "dataset,strategy,query_size,run_seed,agreement,api_calls,dropped_pairs\n";
    for (const auto& r : records) {
        out << r.dataset << "," << r.strategy << "," << r.query_size << ","
            << r.run_seed << "," << fmt_real(r.agreement) << "," << r.api_calls << ","
            << r.dropped_pairs << "\n";
    }
    return out.str();
}

std::string aggregates_csv(const std::vector<SweepAggregate>& aggregates) {
    std::ostringstream out;
    out << "dataset,strategy,query_size,mean_agreement,std_agreement,mean_api_calls\n";
    for (const auto& a : aggregates) {
        out << a.dataset << "," << a.strategy << "," << a.query_size << ","
            << fmt_real(a.mean_agreement) << "," << fmt_real(a.std_agreement) << ","
            << fmt_real(a.mean_api_calls) << "\n";
    }
    return out.str();
}

double paired_t_pvalue_greater(const std::vector<double>& a,
                               const std::vector<double>& b) {
    if (a.size() != b.size()) throw InputError("paired t-test: length mismatch");
    const std::size_t n = a.size();
    if (n < 2) throw InputError("paired t-test: need at least 2 pairs");
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = a[i] - b[i] - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) return mean > 0.0 ? 0.0 : 1.0;
    const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
    boost::math::students_t_distribution<double> dist(static_cast<double>(n - 1));
    return boost::math::cdf(boost::math::complement(dist, t));
}

}  // namespace cfx
