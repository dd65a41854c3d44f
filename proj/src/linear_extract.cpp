#include "cfx/linear_extract.hpp"

#include "cfx/error.hpp"

namespace cfx {

LinearModel extract_linear(const Eigen::VectorXd& cf, const Eigen::VectorXd& ccf,
                           int ccf_label) {
    if (cf.size() != ccf.size())
        throw InputError("extract_linear: dimension mismatch");
    if (!cf.allFinite() || !ccf.allFinite())
        throw InputError("extract_linear: non-finite pair");
    Eigen::VectorXd v = cf - ccf;
    double norm = v.norm();
    if (norm <= 1e-9)
        throw InputError("extract_linear: degenerate pair (cf == ccf)");
    if (ccf_label == 1) v = -v;  // orient toward the class-1 side
    Eigen::VectorXd x0 = 0.5 * (cf + ccf);
    LinearModel m;
    m.theta = v / norm;
    m.b = -m.theta.dot(x0);
    return m;
}

}  // namespace cfx
