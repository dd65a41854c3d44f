// The querying/extraction strategies and substitute training with the
// CF/CCF same-batch pairing constraint.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cfx/cf_oracle.hpp"
#include "cfx/mlp.hpp"

namespace cfx {

enum class Source { Query, Cf, Ccf };

std::string source_name(Source s);

struct SubstituteTrainingSet {
    std::vector<Eigen::VectorXd> xs;   // raw feature space
    std::vector<int> ys;               // cloud labels
    std::vector<Source> sources;
    std::vector<std::pair<int, int>> pairing;  // (cf index, ccf index)
    int dropped_pairs = 0;             // attempts discarded for non-convergence

    std::size_t size() const { return xs.size(); }
    // InputError on ragged rows, bad labels, overlapping or same-label pairs.
    void validate() const;
};

struct AttackBudget {
    long long initial_queries = 0;
    long long api_calls = 0;

    void validate() const;  // api_calls can never undercut the query count
};

// Labels every query with predict; one predict call each, no pairing.
SubstituteTrainingSet steal_ml(const CfOracle& oracle,
                               const std::vector<Eigen::VectorXd>& queries);

// Greedy k-center: seeded-uniform first pick, then repeatedly the point with
// the largest min Euclidean distance to the selected set, lowest index on
// ties. Returns indices into the pool, in selection order.
std::vector<int> coreset_select_indices(const std::vector<Eigen::VectorXd>& pool,
                                        std::size_t k, std::uint64_t seed);
std::vector<Eigen::VectorXd> coreset_select(const std::vector<Eigen::VectorXd>& pool,
                                            std::size_t k, std::uint64_t seed);

// One explain per query; keeps the query item always and the CF item only
// when the solver converged (drops are counted in dropped_pairs).
SubstituteTrainingSet model_extraction(const CfOracle& oracle,
                                       const std::vector<Eigen::VectorXd>& queries);

// Two chained explains per query; both CF and CCF enter the set with a
// pairing entry. include_x additionally stores the query itself, its label
// read off the CCF (no extra call). Either leg failing drops the whole pair.
SubstituteTrainingSet dual_cf(const CfOracle& oracle,
                              const std::vector<Eigen::VectorXd>& queries,
                              bool include_x);

// Epoch ordering that shuffles pairs among themselves (and singles among
// themselves) but keeps each pair adjacent, pairs region first. With an even
// batch size no pair can straddle a batch boundary.
std::vector<int> paired_epoch_order(std::size_t n_items,
                                    const std::vector<std::pair<int, int>>& pairing,
                                    std::uint64_t seed, int epoch);

// Initializes from (arch, cfg.seed) and trains on the set as given; callers
// normalize features beforehand. paired_batching with a nonempty pairing
// demands an even batch_size (ConfigError otherwise) and uses the paired
// epoch order; otherwise this is exactly nn-core train.
MlpModel train_substitute(const SubstituteTrainingSet& set, const MlpArch& arch,
                          const TrainConfig& cfg, bool paired_batching);

// Feature columns, label, source; pairing goes to a sidecar CSV.
std::string training_set_csv(const SubstituteTrainingSet& set,
                             const std::vector<std::string>& feature_names);
std::string pairing_csv(const SubstituteTrainingSet& set);

}  // namespace cfx
