// Closed-form extraction of a linear decision rule from one CF/CCF pair.
#pragma once

#include <Eigen/Dense>

namespace cfx {

struct LinearModel {
    Eigen::VectorXd theta;  // unit normal pointing to the class-1 side
    double b = 0.0;

    int label(const Eigen::VectorXd& x) const {
        return theta.dot(x) + b >= 0.0 ? 1 : 0;
    }
};

// Midpoint of the pair sits on the boundary; the pair's difference vector is
// the normal. ccf_label orients the rule. InputError if the pair is
// degenerate (distance <= 1e-9).
LinearModel extract_linear(const Eigen::VectorXd& cf, const Eigen::VectorXd& ccf,
                           int ccf_label);

}  // namespace cfx
