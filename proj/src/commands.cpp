#include "cfx/commands.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <utility>

#include "cfx/attacks.hpp"
#include "cfx/chart.hpp"
#include "cfx/error.hpp"
#include "cfx/linear_extract.hpp"
#include "cfx/rng.hpp"

namespace fs = std::filesystem;

namespace cfx {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw InputError("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(std::string("cannot open ") + what + " '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_manifest(const std::string& path, const std::string& command,
                    const RunConfig& cfg, const std::vector<std::string>& artifacts,
                    double wall_seconds) {
    nlohmann::ordered_json m;
    m["tool"] = kToolVersion;
    m["command"] = command;
    m["config"] = nlohmann::ordered_json::parse(config_to_json(cfg));
    m["artifacts"] = artifacts;
    m["wall_seconds"] = wall_seconds;
    write_text_file(path, m.dump(2) + "\n");
}

std::vector<Eigen::VectorXd> normalized_rows(const Normalizer& norm,
                                             const std::vector<Eigen::VectorXd>& xs) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(norm.apply(x));
    return out;
}

SweepConfig build_sweep_config(const RunConfig& cfg, const CliOverrides& cli,
                               const std::string& dataset_id,
                               const std::vector<Eigen::VectorXd>& normalized_train) {
    SweepConfig sc;
    sc.dataset_id = dataset_id;
    sc.strategies = cfg.sweep.strategies;
    sc.query_sizes = cli.sizes.empty() ? cfg.sweep.query_sizes : cli.sizes;
    sc.runs_per_size = cli.runs > 0 ? cli.runs : cfg.sweep.runs_per_size;
    sc.base_seed = cli.has_seed ? cli.seed : cfg.sweep.base_seed;
    sc.substitute_hidden = cfg.attack.substitute_hidden;
    sc.train = cfg.attack.train;
    sc.cf = cfg.cf;
    sc.paired_batching = cfg.attack.paired_batching;
    sc.jobs = cli.jobs > 0 ? cli.jobs : cfg.sweep.jobs;
    if (sc.cf.metric == Metric::L1Mad && !sc.cf.mad)
        sc.cf.mad = mad_stats(normalized_train);
    sc.validate();
    return sc;
}

void log_aggregates(std::ostream& log, const std::vector<SweepAggregate>& aggs) {
    for (const auto& a : aggs) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "  %s %s n=%d mean=%.4f std=%.4f api=%.1f",
                      a.dataset.c_str(), a.strategy.c_str(), a.query_size,
                      a.mean_agreement, a.std_agreement, a.mean_api_calls);
        log << buf << "\n";
    }
}

struct Variant {
    std::string label;
    RunConfig cfg;
};

std::vector<Variant> ablation_variants(const RunConfig& base, const std::string& name) {
    std::vector<Variant> out;
    if (name == "capacity") {
        if (base.attack.substitute_hidden.empty())
            throw ConfigError("capacity ablation needs at least one hidden layer");
        const int last = base.attack.substitute_hidden.back();
        RunConfig remove = base;
        remove.attack.substitute_hidden.back() = std::max(1, last / 2);
        RunConfig add = base;
        add.attack.substitute_hidden.back() = last + last / 2;
        RunConfig layer = base;
        layer.attack.substitute_hidden.push_back(last);
        out = {{"base", base},
               {"remove_nodes", remove},
               {"add_nodes", add},
               {"add_layer", layer}};
    } else if (name == "threshold") {
        for (double eps : {0.6, 0.7, 0.8, 0.9}) {
            RunConfig v = base;
            v.cf.threshold = eps;
            char label[24];
            std::snprintf(label, sizeof(label), "eps%.1f", eps);
            out.push_back({label, v});
        }
    } else if (name == "metric") {
        for (Metric m : {Metric::L1, Metric::L2, Metric::L1Mad}) {
            RunConfig v = base;
            v.cf.metric = m;
            v.cf.mad.reset();  // recomputed downstream when the metric wants it
            out.push_back({metric_name(m), v});
        }
    } else if (name == "imbalance") {
        for (double ratio : {1.0, 5.0}) {
            RunConfig v = base;
            v.dataset.rebalance_ratio = ratio;
            char label[24];
            std::snprintf(label, sizeof(label), "ratio%g", ratio);
            out.push_back({label, v});
        }
    } else if (name == "shuffle") {
        RunConfig paired = base;
        paired.sweep.strategies = {Strategy::DualCf};
        paired.attack.paired_batching = true;
        RunConfig shuffled = paired;
        shuffled.attack.paired_batching = false;
        out = {{"paired", paired}, {"shuffled", shuffled}};
    } else {
        throw ConfigError("unknown ablation '" + name +
                          "' (expected capacity, threshold, metric, imbalance or shuffle)");
    }
    return out;
}

}  // namespace

Experiment prepare_experiment(const RunConfig& cfg) {
    cfg.validate();
    Experiment ex;
    ex.id = cfg.dataset.id();
    if (cfg.dataset.kind == "syn_linear") {
        ex.dataset = gen_syn_linear(cfg.dataset.n, cfg.dataset.seed);
    } else if (cfg.dataset.kind == "syn_nonlinear") {
        ex.dataset = gen_syn_nonlinear(cfg.dataset.n, cfg.dataset.seed);
    } else {
        ex.dataset = load_csv(cfg.dataset.path, cfg.dataset.label_column,
                              cfg.dataset.positive_label);
    }
    ex.splits = split_dataset(ex.dataset, cfg.dataset.split_seed);
    if (cfg.dataset.rebalance_ratio > 1.0) {
        // Imbalance lives on the attacker side: the query pool is skewed, the
        // cloud training data and the evaluation split stay untouched.
        ex.splits.query = rebalance(ex.splits.query, cfg.dataset.rebalance_ratio,
                                    seed_mix(cfg.dataset.split_seed, "rebalance"));
    }
    return ex;
}

std::string resolve_out_dir(const CliOverrides& cli, const RunConfig& cfg) {
    if (!cli.out_dir.empty()) return cli.out_dir;
    if (const char* env = std::getenv("CFX_OUT_DIR"); env && *env) return env;
    return cfg.output.dir;
}

std::string cloud_model_path(const std::string& out_dir, const std::string& id) {
    return out_dir + "/" + id + "_cloud.model";
}

std::string cloud_norm_path(const std::string& out_dir, const std::string& id) {
    return out_dir + "/" + id + "_cloud.norm";
}

std::string checkpoint_path(const std::string& out_dir, const std::string& id, int epoch) {
    return out_dir + "/" + id + "_cloud_epoch" + std::to_string(epoch) + ".model";
}

void cmd_train_cloud(const std::string& config_path, const CliOverrides& cli,
                     std::ostream& log) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = load_config(config_path);
    const std::string out_dir = resolve_out_dir(cli, cfg);
    fs::create_directories(out_dir);

    Experiment ex = prepare_experiment(cfg);
    Normalizer norm = fit_normalizer(ex.splits.train);
    std::vector<Eigen::VectorXd> xs = normalized_rows(norm, ex.splits.train.xs);

    MlpArch arch = make_binary_arch(ex.dataset.dim(), cfg.cloud.hidden);
    MlpModel model = mlp_init(arch, seed_mix(cfg.cloud.train.seed, "init"));

    std::vector<std::string> artifacts;
    EpochCallback on_epoch = [&](int epoch, const MlpModel& m, double loss) {
        for (int ce : cfg.cloud.checkpoint_epochs) {
            if (ce != epoch) continue;
            std::string path = checkpoint_path(out_dir, ex.id, epoch);
            save_model_file(m, path);
            artifacts.push_back(path);
            char buf[96];
            std::snprintf(buf, sizeof(buf), "  epoch %d loss %.5f -> %s", epoch, loss,
                          path.c_str());
            log << buf << "\n";
        }
    };
    model = train(std::move(model), xs, ex.splits.train.ys, cfg.cloud.train, on_epoch);

    const std::string model_path = cloud_model_path(out_dir, ex.id);
    const std::string norm_path = cloud_norm_path(out_dir, ex.id);
    save_model_file(model, model_path);
    save_normalizer_file(norm, norm_path);
    artifacts.push_back(model_path);
    artifacts.push_back(norm_path);

    double acc = train_accuracy(model, xs, ex.splits.train.ys);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "cloud model for %s: train accuracy %.4f -> %s",
                  ex.id.c_str(), acc, model_path.c_str());
    log << buf << "\n";

    write_manifest(out_dir + "/" + ex.id + "_train_cloud_manifest.json", "train-cloud",
                   cfg, artifacts, seconds_since(t0));
}

void cmd_sweep(const std::string& config_path, const CliOverrides& cli,
               std::ostream& log) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = load_config(config_path);
    const std::string out_dir = resolve_out_dir(cli, cfg);
    fs::create_directories(out_dir);

    Experiment ex = prepare_experiment(cfg);
    const std::string model_path = cloud_model_path(out_dir, ex.id);
    if (!fs::exists(model_path))
        throw InputError("cloud model '" + model_path + "' not found; run train-cloud first");
    MlpModel cloud = load_model_file(model_path);
    Normalizer cloud_norm = load_normalizer_file(cloud_norm_path(out_dir, ex.id));

    SweepConfig sc = build_sweep_config(cfg, cli, ex.id,
                                        normalized_rows(cloud_norm, ex.splits.train.xs));
    ResultTable table = run_sweep(sc, cloud, cloud_norm, ex.splits);

    const std::string records_path = out_dir + "/" + ex.id + "_records.csv";
    const std::string aggregates_path = out_dir + "/" + ex.id + "_aggregates.csv";
    write_text_file(records_path, records_csv(table.records));
    write_text_file(aggregates_path, aggregates_csv(table.aggregates));
    log << "sweep " << ex.id << ": " << table.records.size() << " runs\n";
    log_aggregates(log, table.aggregates);

    write_manifest(out_dir + "/" + ex.id + "_sweep_manifest.json", "sweep", cfg,
                   {records_path, aggregates_path}, seconds_since(t0));
}

void cmd_ablate(const std::string& config_path, const std::string& ablation,
                const CliOverrides& cli, std::ostream& log) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig base = load_config(config_path);
    const std::string out_dir = resolve_out_dir(cli, base);
    fs::create_directories(out_dir);

    std::vector<Variant> variants = ablation_variants(base, ablation);

    // The cloud artifact is shared: every variant touches only the attacker
    // side (substitute, CF solver, query pool mix).
    const std::string id = base.dataset.id();
    const std::string model_path = cloud_model_path(out_dir, id);
    if (!fs::exists(model_path))
        throw InputError("cloud model '" + model_path + "' not found; run train-cloud first");
    MlpModel cloud = load_model_file(model_path);
    Normalizer cloud_norm = load_normalizer_file(cloud_norm_path(out_dir, id));

    std::vector<std::string> artifacts;
    std::vector<SweepAggregate> combined;
    for (const auto& variant : variants) {
        Experiment ex = prepare_experiment(variant.cfg);
        SweepConfig sc =
            build_sweep_config(variant.cfg, cli, ex.id,
                               normalized_rows(cloud_norm, ex.splits.train.xs));
        ResultTable table = run_sweep(sc, cloud, cloud_norm, ex.splits);

        const std::string stem =
            out_dir + "/" + id + "_ablate_" + ablation + "_" + variant.label;
        write_text_file(stem + "_records.csv", records_csv(table.records));
        write_text_file(stem + "_aggregates.csv", aggregates_csv(table.aggregates));
        artifacts.push_back(stem + "_records.csv");
        artifacts.push_back(stem + "_aggregates.csv");

        log << "ablate " << ablation << " variant " << variant.label << ":\n";
        log_aggregates(log, table.aggregates);
        for (SweepAggregate a : table.aggregates) {
            a.strategy = variant.label + "/" + a.strategy;
            combined.push_back(std::move(a));
        }
    }

    const std::string combined_path =
        out_dir + "/" + id + "_ablate_" + ablation + "_aggregates.csv";
    write_text_file(combined_path, aggregates_csv(combined));
    artifacts.push_back(combined_path);

    write_manifest(out_dir + "/" + id + "_ablate_" + ablation + "_manifest.json",
                   "ablate " + ablation, base, artifacts, seconds_since(t0));
}

void cmd_plot(const std::string& results_csv, const std::string& out_svg,
              const CliOverrides& cli, std::ostream& log) {
    if (cli.cost_axis != "queries" && cli.cost_axis != "api-calls")
        throw ConfigError("--cost-axis must be 'queries' or 'api-calls'");
    std::vector<SweepAggregate> aggs =
        parse_aggregates_csv(read_text_file(results_csv, "results csv"));

    ChartOptions opt;
    opt.use_api_calls = cli.cost_axis == "api-calls";
    opt.title = fs::path(results_csv).stem().string();
    const std::string svg = render_agreement_chart(aggs, opt);

    fs::path parent = fs::path(out_svg).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    write_text_file(out_svg, svg);
    log << "wrote " << out_svg << "\n";
}

LemmaCheckReport lemma_check(std::uint64_t seed, int clouds_per_dim, int n_eval,
                             std::ostream* log) {
    if (clouds_per_dim < 1 || n_eval < 1)
        throw InputError("lemma_check: counts must be positive");
    LemmaCheckReport rep;
    rep.pass = true;
    for (int dim : {2, 5, 10}) {
        double min_ag = 1.0, sum = 0.0;
        for (int k = 0; k < clouds_per_dim; ++k) {
            SplitMix64 rng(seed_mix(seed, "lemma", static_cast<std::uint64_t>(dim),
                                    static_cast<std::uint64_t>(k)));
            Eigen::VectorXd theta(dim);
            for (int j = 0; j < dim; ++j) theta[j] = rng.uniform(-1.0, 1.0);
            if (theta.norm() < 0.1) theta[0] += 1.0;
            theta *= 3.0;  // a crisp boundary, as a trained model would have
            const double bias = -theta.dot(Eigen::VectorXd::Constant(dim, 3.0));

            MlpModel cloud;
            cloud.input_dim = dim;
            Layer head;
            head.W = theta.transpose();
            head.b = Eigen::VectorXd::Constant(1, bias);
            head.act = Activation::Sigmoid;
            cloud.layers.push_back(std::move(head));
            Normalizer identity;
            identity.mean = Eigen::VectorXd::Zero(dim);
            identity.std = Eigen::VectorXd::Ones(dim);
            CfOracle oracle(cloud, identity, CfConfig{});

            Eigen::VectorXd x(dim);
            for (int j = 0; j < dim; ++j) x[j] = rng.uniform(0.0, 6.0);
            auto [cf, ccf] = oracle.explain_of_explain(x);

            double ag = 0.0;
            if (cf.converged && ccf.converged) {
                LinearModel stolen =
                    extract_linear(cf.explanation, ccf.explanation, ccf.cf_label);
                int agree = 0;
                Eigen::VectorXd p(dim);
                for (int i = 0; i < n_eval; ++i) {
                    for (int j = 0; j < dim; ++j) p[j] = rng.uniform(0.0, 6.0);
                    int truth = forward(cloud, p).label;
                    if (truth == stolen.label(p)) ++agree;
                }
                ag = static_cast<double>(agree) / n_eval;
            }
            min_ag = std::min(min_ag, ag);
            sum += ag;
        }
        LemmaCheckReport::Row row;
        row.dim = dim;
        row.min_agreement = min_ag;
        row.mean_agreement = sum / clouds_per_dim;
        rep.rows.push_back(row);
        if (min_ag < 0.999) rep.pass = false;
        if (log) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "d=%d: min agreement %.5f, mean %.5f", dim,
                          row.min_agreement, row.mean_agreement);
            *log << buf << "\n";
        }
    }
    return rep;
}

bool cmd_lemma_check(std::uint64_t seed, std::ostream& log) {
    LemmaCheckReport rep = lemma_check(seed, 20, 10000, &log);
    log << (rep.pass ? "lemma-check: PASS (one CF/CCF pair pins a linear boundary)\n"
                     : "lemma-check: FAIL\n");
    return rep.pass;
}

}  // namespace cfx
