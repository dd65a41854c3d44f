#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "cfx/cf_oracle.hpp"
#include "cfx/error.hpp"
#include "cfx/linear_extract.hpp"
#include "cfx/mlp.hpp"
#include "cfx/rng.hpp"

namespace {

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

cfx::MlpModel linear_mlp(const Eigen::VectorXd& theta, double bias) {
    cfx::MlpModel m;
    m.input_dim = static_cast<int>(theta.size());
    cfx::Layer l;
    l.W = theta.transpose();
    l.b.resize(1);
    l.b[0] = bias;
    l.act = cfx::Activation::Sigmoid;
    m.layers.push_back(std::move(l));
    return m;
}

cfx::Normalizer identity_norm(int dim) {
    cfx::Normalizer n;
    n.mean = Eigen::VectorXd::Zero(dim);
    n.std = Eigen::VectorXd::Ones(dim);
    return n;
}

}  // namespace

TEST_CASE("extract_linear pinned example") {
    auto m = cfx::extract_linear(vec2(3.405, 0), vec2(2.595, 0), 0);
    CHECK(m.theta[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.theta[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.b == doctest::Approx(-3.0).epsilon(1e-12));

    Eigen::VectorXd x0 = vec2(3.0, 0.0);
    CHECK(std::fabs(m.theta.dot(x0) + m.b) < 1e-12);
    CHECK(m.label(vec2(5, 0)) == 1);
    CHECK(m.label(vec2(1, 0)) == 0);
}

TEST_CASE("extract_linear is orientation and scale invariant") {
    Eigen::VectorXd cf = vec2(3.405, 0), ccf = vec2(2.595, 0);
    auto a = cfx::extract_linear(cf, ccf, 0);
    auto b = cfx::extract_linear(ccf, cf, 1);  // swapped roles, swapped labels
    CHECK(a.theta.isApprox(b.theta, 1e-12));
    CHECK(a.b == doctest::Approx(b.b).epsilon(1e-12));

    Eigen::VectorXd x0 = 0.5 * (cf + ccf);
    auto wide = cfx::extract_linear(x0 + 5.0 * (cf - x0), x0 + 5.0 * (ccf - x0), 0);
    CHECK(a.theta.isApprox(wide.theta, 1e-12));
    CHECK(a.b == doctest::Approx(wide.b).epsilon(1e-12));

    CHECK_THROWS_AS(cfx::extract_linear(cf, cf, 0), cfx::InputError);
    Eigen::VectorXd three(3);
    three << 1, 2, 3;
    CHECK_THROWS_AS(cfx::extract_linear(cf, three, 0), cfx::InputError);
}

TEST_CASE("one pair recovers a random linear cloud model") {
    for (int d : {2, 5}) {
        for (int trial = 0; trial < 5; ++trial) {
            cfx::SplitMix64 rng(cfx::seed_mix(4000, "lemma", d, trial));
            Eigen::VectorXd theta(d);
            for (int j = 0; j < d; ++j) theta[j] = rng.uniform(-1.0, 1.0);
            if (theta.norm() < 0.1) theta[0] += 1.0;
            theta *= 3.0;  // sharpen, like a trained model
            Eigen::VectorXd center = Eigen::VectorXd::Constant(d, 3.0);
            double bias = -theta.dot(center);

            cfx::CfConfig cfg;
            cfg.threshold = 0.7;
            cfx::CfOracle oracle(linear_mlp(theta, bias), identity_norm(d), cfg);

            Eigen::VectorXd x(d);
            for (int j = 0; j < d; ++j) x[j] = rng.uniform(0.0, 6.0);
            auto [cf, ccf] = oracle.explain_of_explain(x);
            REQUIRE(cf.converged);
            REQUIRE(ccf.converged);
            auto stolen = cfx::extract_linear(cf.explanation, ccf.explanation,
                                              ccf.cf_label);

            int agree = 0;
            const int n_eval = 2000;
            for (int i = 0; i < n_eval; ++i) {
                Eigen::VectorXd p(d);
                for (int j = 0; j < d; ++j) p[j] = rng.uniform(0.0, 6.0);
                int cloud = theta.dot(p) + bias >= 0.0 ? 1 : 0;
                if (cloud == stolen.label(p)) ++agree;
            }
            CHECK(static_cast<double>(agree) / n_eval >= 0.999);
        }
    }
}
