#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <vector>

#include "cfx/attacks.hpp"
#include "cfx/cf_oracle.hpp"
#include "cfx/error.hpp"
#include "cfx/mlp.hpp"
#include "cfx/rng.hpp"

namespace {

cfx::MlpModel linear_model(std::vector<double> theta, double bias) {
    cfx::MlpModel m;
    m.input_dim = static_cast<int>(theta.size());
    cfx::Layer l;
    l.W.resize(1, m.input_dim);
    for (int i = 0; i < m.input_dim; ++i) l.W(0, i) = theta[i];
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

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

cfx::CfConfig fast_cf() {
    cfx::CfConfig cfg;
    cfg.threshold = 0.6;
    return cfg;
}

cfx::CfConfig dead_cf() {
    cfx::CfConfig cfg;
    cfg.threshold = 0.9;
    cfg.lambda_init = 1e-12;
    cfg.max_steps = 1;
    cfg.max_escalations = 0;
    return cfg;
}

double min_pair_d2(const std::vector<Eigen::VectorXd>& pts) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            best = std::min(best, (pts[i] - pts[j]).squaredNorm());
    return best;
}

}  // namespace

TEST_CASE("steal_ml labels queries with predict only") {
    cfx::CfOracle oracle(linear_model({1.0, 0.0}, -3.0), identity_norm(2), fast_cf());
    std::vector<Eigen::VectorXd> qs = {vec2(1, 0), vec2(5, 2), vec2(2, 9),
                                       vec2(4, 4), vec2(3, 0)};
    auto set = cfx::steal_ml(oracle, qs);
    REQUIRE(set.size() == 5);
    CHECK(set.pairing.empty());
    CHECK(set.dropped_pairs == 0);
    CHECK(oracle.predict_calls() == 5);
    CHECK(oracle.explain_calls() == 0);
    for (std::size_t i = 0; i < qs.size(); ++i) {
        CHECK(set.sources[i] == cfx::Source::Query);
        CHECK(set.ys[i] == cfx::forward(oracle.model(), qs[i]).label);
    }
    cfx::AttackBudget budget{static_cast<long long>(qs.size()), oracle.predict_calls()};
    budget.validate();
    CHECK_THROWS_AS(cfx::steal_ml(oracle, {}), cfx::InputError);
}

TEST_CASE("coreset picks spread points") {
    std::vector<Eigen::VectorXd> corners = {vec2(0, 0), vec2(0, 2), vec2(2, 0),
                                            vec2(2, 2)};
    auto idx = cfx::coreset_select_indices(corners, 2, 3);
    REQUIRE(idx.size() == 2);
    CHECK((corners[idx[0]] - corners[idx[1]]).squaredNorm() == 8.0);  // a diagonal

    auto all = cfx::coreset_select_indices(corners, 4, 3);
    auto sorted = all;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2, 3});

    // all-identical pool: ties resolve to the lowest untaken index
    std::vector<Eigen::VectorXd> same(3, vec2(1, 1));
    auto tied = cfx::coreset_select_indices(same, 3, 11);
    auto tied_sorted = tied;
    std::sort(tied_sorted.begin(), tied_sorted.end());
    CHECK(tied_sorted == std::vector<int>{0, 1, 2});
    CHECK(tied[1] < tied[2]);

    CHECK(cfx::coreset_select(corners, 2, 3).size() == 2);
    CHECK(cfx::coreset_select_indices(corners, 0, 0).empty());
    CHECK_THROWS_AS(cfx::coreset_select_indices(corners, 5, 0), cfx::InputError);
}

TEST_CASE("coreset beats random sampling on spread") {
    for (int pool_seed = 0; pool_seed < 100; ++pool_seed) {
        cfx::SplitMix64 rng(cfx::seed_mix(900, "coreset-pool", pool_seed));
        std::vector<Eigen::VectorXd> pool;
        for (int i = 0; i < 30; ++i)
            pool.push_back(vec2(rng.uniform(0, 6), rng.uniform(0, 6)));
        auto core = cfx::coreset_select(pool, 5, 1000 + pool_seed);
        std::vector<Eigen::VectorXd> rnd;
        cfx::SplitMix64 pick(cfx::seed_mix(901, "coreset-rand", pool_seed));
        for (int i : cfx::sample_without_replacement(pool.size(), 5, pick))
            rnd.push_back(pool[i]);
        CHECK(min_pair_d2(core) >= min_pair_d2(rnd));
    }
}

TEST_CASE("model_extraction stores query and cf items") {
    cfx::CfOracle oracle(linear_model({1.0, 0.0}, -3.0), identity_norm(2), fast_cf());
    std::vector<Eigen::VectorXd> qs = {vec2(1, 0), vec2(5, 2), vec2(2, 1)};
    auto set = cfx::model_extraction(oracle, qs);
    REQUIRE(set.size() == 6);
    CHECK(oracle.explain_calls() == 3);
    CHECK(oracle.predict_calls() == 0);
    CHECK(set.pairing.empty());
    CHECK(set.dropped_pairs == 0);
    for (int i = 0; i < 3; ++i) {
        CHECK(set.sources[2 * i] == cfx::Source::Query);
        CHECK(set.sources[2 * i + 1] == cfx::Source::Cf);
        CHECK(set.ys[2 * i] != set.ys[2 * i + 1]);
    }
    cfx::AttackBudget budget{3, oracle.explain_calls()};
    budget.validate();
}

TEST_CASE("model_extraction keeps the query when the cf fails") {
    cfx::CfOracle oracle(linear_model({1.0, 0.0}, -3.0), identity_norm(2), dead_cf());
    auto set = cfx::model_extraction(oracle, {vec2(1, 0), vec2(5, 2)});
    CHECK(set.size() == 2);
    CHECK(set.dropped_pairs == 2);
    for (auto s : set.sources) CHECK(s == cfx::Source::Query);
}

TEST_CASE("dual_cf builds balanced pairs") {
    cfx::CfOracle oracle(linear_model({1.0, 0.0}, -3.0), identity_norm(2), fast_cf());
    std::vector<Eigen::VectorXd> qs = {vec2(1, 0), vec2(5, 2), vec2(2, 1), vec2(4, 4)};
    auto set = cfx::dual_cf(oracle, qs, false);
    REQUIRE(set.size() == 8);
    CHECK(set.pairing.size() == 4);
    CHECK(oracle.explain_calls() == 8);
    CHECK(set.dropped_pairs == 0);
    int positives = 0;
    for (int y : set.ys) positives += y;
    CHECK(positives == 4);  // exactly class-balanced
    for (const auto& [a, b] : set.pairing) {
        CHECK(set.ys[a] + set.ys[b] == 1);
        CHECK(set.sources[a] == cfx::Source::Cf);
        CHECK(set.sources[b] == cfx::Source::Ccf);
    }
    set.validate();
    cfx::AttackBudget budget{4, oracle.explain_calls()};
    budget.validate();
}

TEST_CASE("dual_cfx adds the query with its chained label") {
    cfx::CfOracle oracle(linear_model({1.0, 0.0}, -3.0), identity_norm(2), fast_cf());
    std::vector<Eigen::VectorXd> qs = {vec2(1, 0), vec2(5, 2), vec2(2, 1), vec2(4, 4)};
    auto set = cfx::dual_cf(oracle, qs, true);
    REQUIRE(set.size() == 12);
    CHECK(set.pairing.size() == 4);
    CHECK(oracle.explain_calls() == 8);  // labels for x cost nothing extra
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (set.sources[i] != cfx::Source::Query) continue;
        CHECK(set.ys[i] == cfx::forward(oracle.model(), set.xs[i]).label);
    }
    // ccf carries the original query's cloud label
    for (const auto& [a, b] : set.pairing)
        CHECK(set.ys[b] == cfx::forward(oracle.model(), set.xs[b]).label);
}

TEST_CASE("dual_cf drops pairs when a leg fails") {
    cfx::CfOracle oracle(linear_model({1.0, 0.0}, -3.0), identity_norm(2), dead_cf());
    auto set = cfx::dual_cf(oracle, {vec2(1, 0), vec2(5, 2)}, true);
    CHECK(set.size() == 0);
    CHECK(set.dropped_pairs == 2);
    CHECK(oracle.explain_calls() == 4);
}

TEST_CASE("paired_epoch_order keeps pairs adjacent and pairs-first") {
    std::vector<std::pair<int, int>> pairing = {{0, 1}, {2, 3}, {4, 5},
                                                {6, 7}, {8, 9}, {10, 11}};
    const std::size_t n = 15;
    bool epochs_differ = false;
    std::vector<int> first_epoch;
    for (int epoch = 1; epoch <= 40; ++epoch) {
        auto order = cfx::paired_epoch_order(n, pairing, 77, epoch);
        REQUIRE(order.size() == n);
        auto sorted = order;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < n; ++i) CHECK(sorted[i] == static_cast<int>(i));

        std::vector<int> pos(n);
        for (std::size_t p = 0; p < n; ++p) pos[order[p]] = static_cast<int>(p);
        for (const auto& [a, b] : pairing) {
            CHECK(pos[b] == pos[a] + 1);
            CHECK(pos[a] % 2 == 0);
            for (int batch : {2, 4, 32})
                CHECK(pos[a] / batch == pos[b] / batch);
        }
        for (int single : {12, 13, 14}) CHECK(pos[single] >= 12);

        if (epoch == 1) first_epoch = order;
        else if (order != first_epoch) epochs_differ = true;
    }
    CHECK(epochs_differ);
}

TEST_CASE("train_substitute honors pairing and determinism") {
    cfx::CfOracle oracle(linear_model({1.0, 0.0}, -3.0), identity_norm(2), fast_cf());
    std::vector<Eigen::VectorXd> qs;
    cfx::SplitMix64 rng(6);
    for (int i = 0; i < 8; ++i) qs.push_back(vec2(rng.uniform(0, 6), rng.uniform(0, 6)));
    auto set = cfx::dual_cf(oracle, qs, true);

    auto arch = cfx::make_binary_arch(2, {4});
    cfx::TrainConfig cfg;
    cfg.learning_rate = 0.005;
    cfg.batch_size = 4;
    cfg.epochs = 5;
    cfg.seed = 99;

    auto m1 = cfx::train_substitute(set, arch, cfg, true);
    auto m2 = cfx::train_substitute(set, arch, cfg, true);
    CHECK(cfx::save_model(m1) == cfx::save_model(m2));

    auto shuffled = cfx::train_substitute(set, arch, cfg, false);
    CHECK_FALSE(cfx::save_model(shuffled) == cfx::save_model(m1));

    cfx::TrainConfig odd = cfg;
    odd.batch_size = 3;
    CHECK_THROWS_AS(cfx::train_substitute(set, arch, odd, true), cfx::ConfigError);
    cfx::train_substitute(set, arch, odd, false);  // odd is fine unpaired

    // without pairing entries, paired batching degenerates to plain training
    auto plain_set = cfx::steal_ml(oracle, qs);
    auto a = cfx::train_substitute(plain_set, arch, cfg, true);
    auto b = cfx::train_substitute(plain_set, arch, cfg, false);
    CHECK(cfx::save_model(a) == cfx::save_model(b));
    auto manual = cfx::train(cfx::mlp_init(arch, cfx::seed_mix(cfg.seed, "init")),
                             plain_set.xs, plain_set.ys, cfg);
    CHECK(cfx::save_model(a) == cfx::save_model(manual));
}

TEST_CASE("training set validation catches bad pairings") {
    cfx::SubstituteTrainingSet set;
    set.xs = {vec2(0, 0), vec2(1, 1)};
    set.ys = {1, 1};
    set.sources = {cfx::Source::Cf, cfx::Source::Ccf};
    set.pairing = {{0, 1}};
    CHECK_THROWS_AS(set.validate(), cfx::InputError);  // same-label pair
    set.ys = {1, 0};
    set.validate();
    set.pairing = {{0, 0}};
    CHECK_THROWS_AS(set.validate(), cfx::InputError);
    set.pairing = {{0, 5}};
    CHECK_THROWS_AS(set.validate(), cfx::InputError);
    set.pairing = {};
    set.validate();

    cfx::AttackBudget bad{5, 4};
    CHECK_THROWS_AS(bad.validate(), cfx::InputError);
}

TEST_CASE("training set csv and pairing sidecar") {
    cfx::SubstituteTrainingSet set;
    set.xs = {vec2(1, 2), vec2(3, 4), vec2(0, 1)};
    set.ys = {1, 0, 1};
    set.sources = {cfx::Source::Query, cfx::Source::Cf, cfx::Source::Ccf};
    set.pairing = {{1, 2}};
    CHECK(cfx::training_set_csv(set, {"x1", "x2"}) ==
          "x1,x2,label,source\n"
          "1,2,1,query\n"
          "3,4,0,cf\n"
          "0,1,1,ccf\n");
    CHECK(cfx::pairing_csv(set) == "cf_index,ccf_index\n1,2\n");
    CHECK_THROWS_AS(cfx::training_set_csv(set, {"only_one"}), cfx::InputError);
}
