// Synthetic dataset generators, CSV ingestion, normalization, and the
// 50/25/25 split protocol shared by every experiment.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace cfx {

struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<Eigen::VectorXd> xs;
    std::vector<int> ys;                 // 0/1
    std::string provenance;              // synthetic-linear | synthetic-nonlinear | csv:<path>

    int dim() const { return feature_names.empty() ? 0 : static_cast<int>(feature_names.size()); }
    std::size_t size() const { return xs.size(); }
    // Throws InputError on ragged rows, bad labels, or an empty set.
    void validate() const;
};

struct SplitSet {
    Dataset train;  // 50%, remainder after rounding
    Dataset query;  // 25%
    Dataset eval;   // 25%
};

// True boundary functions behind the synthetic sets; exposed so probes and
// plots can query ground truth without regenerating data.
int syn_linear_label(double x1, double x2);     // 1 iff x1 + x2 > 6
int syn_nonlinear_label(double x1, double x2);  // 1 iff x2 > 3 + 1.5 sin(pi x1 / 3)

// n uniform points on [0,6]^2, labelled by the boundaries above. n >= 4.
Dataset gen_syn_linear(int n, std::uint64_t seed);
Dataset gen_syn_nonlinear(int n, std::uint64_t seed);

// Comma-separated, first row header, '.' decimal point. The label column is
// mapped to 1 iff the cell equals positive_label; all other columns must
// parse as finite reals. Errors name the offending row and column.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::string& positive_label);

// Mirrors the load format: header of feature names plus `label`.
void save_csv(const Dataset& ds, const std::string& path);

// Seeded uniform shuffle, then a contiguous 50/25/25 cut. Rounding sends the
// remainder to train: n=101 -> (51, 25, 25). Requires n >= 8.
SplitSet split_dataset(const Dataset& ds, std::uint64_t seed);

struct Normalizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;  // population std, floored at 1e-6

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    Eigen::VectorXd inverse(const Eigen::VectorXd& xhat) const;
    int dim() const { return static_cast<int>(mean.size()); }
};

Normalizer fit_normalizer(const Dataset& reference);
Normalizer fit_normalizer(const std::vector<Eigen::VectorXd>& xs);

// Versioned text format (hexfloat payload, bit-exact round trips) so a saved
// cloud model stays usable without refitting its normalizer.
std::string save_normalizer(const Normalizer& norm);
Normalizer load_normalizer_from_string(const std::string& text);
void save_normalizer_file(const Normalizer& norm, const std::string& path);
Normalizer load_normalizer_file(const std::string& path);

// Subsample the minority class so majority:minority is about `ratio`.
// A set already at least that imbalanced is returned unchanged (never
// upsamples), so ratio=1 is a no-op. Row order is kept.
Dataset rebalance(const Dataset& ds, double ratio, std::uint64_t seed);

}  // namespace cfx
