#include "cfx/attacks.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "cfx/error.hpp"
#include "cfx/rng.hpp"

namespace cfx {

std::string source_name(Source s) {
    switch (s) {
        case Source::Query: return "query";
        case Source::Cf: return "cf";
        case Source::Ccf: return "ccf";
    }
    return "?";
}

void SubstituteTrainingSet::validate() const {
    if (xs.empty()) throw InputError("substitute training set is empty");
    if (xs.size() != ys.size() || xs.size() != sources.size())
        throw InputError("substitute training set columns disagree in length");
    const Eigen::Index d = xs[0].size();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i].size() != d) throw InputError("training set row " + std::to_string(i) +
                                                " has the wrong dimension");
        if (!xs[i].allFinite())
            throw InputError("training set row " + std::to_string(i) + " is non-finite");
        if (ys[i] != 0 && ys[i] != 1)
            throw InputError("training set row " + std::to_string(i) + " has a bad label");
    }
    std::vector<char> used(xs.size(), 0);
    for (const auto& [a, b] : pairing) {
        if (a < 0 || b < 0 || a >= static_cast<int>(xs.size()) ||
            b >= static_cast<int>(xs.size()))
            throw InputError("pairing index out of range");
        if (a == b) throw InputError("pair references a single item");
        if (used[a] || used[b]) throw InputError("item appears in more than one pair");
        used[a] = used[b] = 1;
        if (ys[a] + ys[b] != 1)
            throw InputError("paired items must carry opposite labels");
    }
    if (dropped_pairs < 0) throw InputError("negative dropped_pairs");
}

void AttackBudget::validate() const {
    if (api_calls < initial_queries)
        throw InputError("api_calls " + std::to_string(api_calls) +
                         " below initial query count " + std::to_string(initial_queries));
}

SubstituteTrainingSet steal_ml(const CfOracle& oracle,
                               const std::vector<Eigen::VectorXd>& queries) {
    if (queries.empty()) throw InputError("steal_ml: no queries");
    SubstituteTrainingSet set;
    for (const auto& x : queries) {
        set.xs.push_back(x);
        set.ys.push_back(oracle.predict(x).label);
        set.sources.push_back(Source::Query);
    }
    return set;
}

std::vector<int> coreset_select_indices(const std::vector<Eigen::VectorXd>& pool,
                                        std::size_t k, std::uint64_t seed) {
    if (k > pool.size())
        throw InputError("coreset_select: k=" + std::to_string(k) + " exceeds pool size " +
                         std::to_string(pool.size()));
    std::vector<int> selected;
    if (k == 0) return selected;
    SplitMix64 rng(seed);
    int first = static_cast<int>(rng.next_below(pool.size()));
    selected.push_back(first);
    std::vector<char> taken(pool.size(), 0);
    taken[first] = 1;
    std::vector<double> min_d2(pool.size(), std::numeric_limits<double>::infinity());
    while (selected.size() < k) {
        const Eigen::VectorXd& last = pool[selected.back()];
        int best = -1;
        double best_d2 = -1.0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            double d2 = (pool[i] - last).squaredNorm();
            if (d2 < min_d2[i]) min_d2[i] = d2;
            if (taken[i]) continue;
            if (min_d2[i] > best_d2) {  // strict: ties keep the lowest index
                best_d2 = min_d2[i];
                best = static_cast<int>(i);
            }
        }
        taken[best] = 1;
        selected.push_back(best);
    }
    return selected;
}

std::vector<Eigen::VectorXd> coreset_select(const std::vector<Eigen::VectorXd>& pool,
                                            std::size_t k, std::uint64_t seed) {
    std::vector<Eigen::VectorXd> out;
    for (int i : coreset_select_indices(pool, k, seed)) out.push_back(pool[i]);
    return out;
}

SubstituteTrainingSet model_extraction(const CfOracle& oracle,
                                       const std::vector<Eigen::VectorXd>& queries) {
    if (queries.empty()) throw InputError("model_extraction: no queries");
    SubstituteTrainingSet set;
    for (const auto& x : queries) {
        CfResult r = oracle.explain(x);
        set.xs.push_back(x);
        set.ys.push_back(r.origin_label);
        set.sources.push_back(Source::Query);
        if (!r.converged) {
            ++set.dropped_pairs;
            continue;
        }
        set.xs.push_back(r.explanation);
        set.ys.push_back(r.cf_label);
        set.sources.push_back(Source::Cf);
    }
    return set;
}

SubstituteTrainingSet dual_cf(const CfOracle& oracle,
                              const std::vector<Eigen::VectorXd>& queries,
                              bool include_x) {
    if (queries.empty()) throw InputError("dual_cf: no queries");
    SubstituteTrainingSet set;
    for (const auto& x : queries) {
        auto [cf, ccf] = oracle.explain_of_explain(x);
        if (!cf.converged || !ccf.converged) {
            ++set.dropped_pairs;
            continue;
        }
        int cf_idx = static_cast<int>(set.xs.size());
        set.xs.push_back(cf.explanation);
        set.ys.push_back(cf.cf_label);
        set.sources.push_back(Source::Cf);
        int ccf_idx = static_cast<int>(set.xs.size());
        set.xs.push_back(ccf.explanation);
        set.ys.push_back(ccf.cf_label);
        set.sources.push_back(Source::Ccf);
        set.pairing.emplace_back(cf_idx, ccf_idx);
        if (include_x) {
            set.xs.push_back(x);
            set.ys.push_back(ccf.cf_label);  // the chain already told us f(x)
            set.sources.push_back(Source::Query);
        }
    }
    return set;
}

std::vector<int> paired_epoch_order(std::size_t n_items,
                                    const std::vector<std::pair<int, int>>& pairing,
                                    std::uint64_t seed, int epoch) {
    SplitMix64 rng(seed_mix(seed, "pair-shuffle", static_cast<std::uint64_t>(epoch)));
    std::vector<char> in_pair(n_items, 0);
    for (const auto& [a, b] : pairing) in_pair[a] = in_pair[b] = 1;

    std::vector<int> order;
    order.reserve(n_items);
    std::vector<int> pair_perm = shuffled_indices(pairing.size(), rng);
    for (int pi : pair_perm) {
        order.push_back(pairing[pi].first);
        order.push_back(pairing[pi].second);
    }
    std::vector<int> singles;
    for (std::size_t i = 0; i < n_items; ++i)
        if (!in_pair[i]) singles.push_back(static_cast<int>(i));
    std::vector<int> single_perm = shuffled_indices(singles.size(), rng);
    for (int si : single_perm) order.push_back(singles[si]);
    return order;
}

MlpModel train_substitute(const SubstituteTrainingSet& set, const MlpArch& arch,
                          const TrainConfig& cfg, bool paired_batching) {
    set.validate();
    MlpModel model = mlp_init(arch, seed_mix(cfg.seed, "init"));
    if (!paired_batching || set.pairing.empty())
        return train(std::move(model), set.xs, set.ys, cfg);
    if (cfg.batch_size % 2 != 0)
        throw ConfigError("paired batching requires an even batch_size, got " +
                          std::to_string(cfg.batch_size));
    std::size_t n = set.xs.size();
    const auto& pairing = set.pairing;
    auto make_order = [n, &pairing, seed = cfg.seed](int epoch, std::vector<int>& order) {
        order = paired_epoch_order(n, pairing, seed, epoch);
    };
    return train_with_order(std::move(model), set.xs, set.ys, cfg, make_order);
}

std::string training_set_csv(const SubstituteTrainingSet& set,
                             const std::vector<std::string>& feature_names) {
    set.validate();
    if (!set.xs.empty() &&
        set.xs[0].size() != static_cast<Eigen::Index>(feature_names.size()))
        throw InputError("training_set_csv: feature name count mismatch");
    std::ostringstream out;
    for (const auto& n : feature_names) out << n << ",";
    out << "label,source\n";
    char buf[64];
    for (std::size_t i = 0; i < set.xs.size(); ++i) {
        for (Eigen::Index j = 0; j < set.xs[i].size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", set.xs[i][j]);
            out << buf << ",";
        }
        out << set.ys[i] << "," << source_name(set.sources[i]) << "\n";
    }
    return out.str();
}

std::string pairing_csv(const SubstituteTrainingSet& set) {
    std::ostringstream out;
    out << "cf_index,ccf_index\n";
    for (const auto& [a, b] : set.pairing) out << a << "," << b << "\n";
    return out.str();
}

}  // namespace cfx
