#include "cfx/config.hpp"

#include <json.hpp>

#include <cctype>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "cfx/error.hpp"

namespace cfx {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config: " + path + ": " + what);
}

std::string join(const std::string& path, const char* key) {
    return path.empty() ? key : path + "." + key;
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) fail(join(path, it.key().c_str()), "unknown key");
    }
}

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double get_real(const json& obj, const std::string& path, const char* key, double dflt) {
    const json* v = find(obj, key);
    if (!v) return dflt;
    if (!v->is_number()) fail(join(path, key), "expected a number");
    return v->get<double>();
}

int get_int(const json& obj, const std::string& path, const char* key, int dflt) {
    const json* v = find(obj, key);
    if (!v) return dflt;
    if (!v->is_number_integer()) fail(join(path, key), "expected an integer");
    return v->get<int>();
}

std::uint64_t get_u64(const json& obj, const std::string& path, const char* key,
                      std::uint64_t dflt) {
    const json* v = find(obj, key);
    if (!v) return dflt;
    if (!(v->is_number_unsigned() || (v->is_number_integer() && v->get<long long>() >= 0)))
        fail(join(path, key), "expected a non-negative integer");
    return v->get<std::uint64_t>();
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool dflt) {
    const json* v = find(obj, key);
    if (!v) return dflt;
    if (!v->is_boolean()) fail(join(path, key), "expected a boolean");
    return v->get<bool>();
}

std::string get_str(const json& obj, const std::string& path, const char* key,
                    const std::string& dflt) {
    const json* v = find(obj, key);
    if (!v) return dflt;
    if (!v->is_string()) fail(join(path, key), "expected a string");
    return v->get<std::string>();
}

std::vector<int> get_int_list(const json& obj, const std::string& path, const char* key,
                              const std::vector<int>& dflt) {
    const json* v = find(obj, key);
    if (!v) return dflt;
    if (!v->is_array()) fail(join(path, key), "expected an array of integers");
    std::vector<int> out;
    for (const auto& e : *v) {
        if (!e.is_number_integer()) fail(join(path, key), "expected an array of integers");
        out.push_back(e.get<int>());
    }
    return out;
}

const json& section(const json& root, const char* name, const json& empty) {
    const json* v = find(root, name);
    if (!v) return empty;
    if (!v->is_object()) fail(name, "expected an object");
    return *v;
}

void parse_train(const json& obj, const std::string& path, TrainConfig& train) {
    train.learning_rate = get_real(obj, path, "learning_rate", train.learning_rate);
    train.batch_size = get_int(obj, path, "batch_size", train.batch_size);
    train.epochs = get_int(obj, path, "epochs", train.epochs);
}

}  // namespace

std::string DatasetConfig::id() const {
    if (kind != "csv") return kind;
    std::string stem = path;
    auto slash = stem.find_last_of("/\\");
    if (slash != std::string::npos) stem = stem.substr(slash + 1);
    auto dot = stem.find_last_of('.');
    if (dot != std::string::npos && dot > 0) stem = stem.substr(0, dot);
    for (char& c : stem) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    }
    return stem.empty() ? "csv" : stem;
}

void RunConfig::validate() const {
    if (dataset.kind != "syn_linear" && dataset.kind != "syn_nonlinear" &&
        dataset.kind != "csv")
        throw ConfigError("config: dataset.kind: unknown kind '" + dataset.kind + "'");
    if (dataset.kind == "csv" && dataset.path.empty())
        throw ConfigError("config: dataset.path: required for csv datasets");
    if (dataset.kind != "csv" && dataset.n < 8)
        throw ConfigError("config: dataset.n: need at least 8 rows to split");
    if (!(dataset.rebalance_ratio >= 1.0))
        throw ConfigError("config: dataset.rebalance_ratio: must be >= 1");

    for (int w : cloud.hidden)
        if (w < 1) throw ConfigError("config: cloud.hidden: widths must be positive");
    try {
        cloud.train.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config: cloud: ") + e.what());
    }
    int prev = 0;
    for (int e : cloud.checkpoint_epochs) {
        if (e <= prev)
            throw ConfigError("config: cloud.checkpoint_epochs: must be ascending and positive");
        if (e > cloud.train.epochs)
            throw ConfigError("config: cloud.checkpoint_epochs: epoch " + std::to_string(e) +
                              " exceeds cloud.epochs");
        prev = e;
    }

    for (int w : attack.substitute_hidden)
        if (w < 1)
            throw ConfigError("config: attack.substitute_hidden: widths must be positive");
    try {
        attack.train.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config: attack: ") + e.what());
    }
    if (attack.paired_batching && attack.train.batch_size % 2 != 0)
        throw ConfigError("config: attack.batch_size: paired batching needs an even batch size");

    if (sweep.strategies.empty())
        throw ConfigError("config: sweep.strategies: at least one strategy");
    if (sweep.runs_per_size < 1)
        throw ConfigError("config: sweep.runs_per_size: must be >= 1");
    for (std::size_t i = 0; i < sweep.query_sizes.size(); ++i) {
        if (sweep.query_sizes[i] <= 0)
            throw ConfigError("config: sweep.query_sizes: must be positive");
        if (i > 0 && sweep.query_sizes[i] <= sweep.query_sizes[i - 1])
            throw ConfigError("config: sweep.query_sizes: must be strictly ascending");
    }
    if (sweep.query_sizes.empty())
        throw ConfigError("config: sweep.query_sizes: at least one size");
    if (sweep.jobs < 1) throw ConfigError("config: sweep.jobs: must be >= 1");

    if (output.dir.empty()) throw ConfigError("config: output.dir: must not be empty");
}

RunConfig parse_config_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");
    check_keys(root, "", {"dataset", "cloud", "cf", "attack", "sweep", "output"});
    const json empty = json::object();

    RunConfig cfg;

    const json& ds = section(root, "dataset", empty);
    check_keys(ds, "dataset",
               {"kind", "n", "seed", "path", "label_column", "positive_label",
                "split_seed", "rebalance_ratio"});
    cfg.dataset.kind = get_str(ds, "dataset", "kind", cfg.dataset.kind);
    cfg.dataset.n = get_int(ds, "dataset", "n", cfg.dataset.n);
    cfg.dataset.seed = get_u64(ds, "dataset", "seed", cfg.dataset.seed);
    cfg.dataset.path = get_str(ds, "dataset", "path", cfg.dataset.path);
    cfg.dataset.label_column = get_str(ds, "dataset", "label_column", cfg.dataset.label_column);
    cfg.dataset.positive_label =
        get_str(ds, "dataset", "positive_label", cfg.dataset.positive_label);
    cfg.dataset.split_seed = get_u64(ds, "dataset", "split_seed", cfg.dataset.split_seed);
    cfg.dataset.rebalance_ratio =
        get_real(ds, "dataset", "rebalance_ratio", cfg.dataset.rebalance_ratio);

    const json& cl = section(root, "cloud", empty);
    check_keys(cl, "cloud",
               {"hidden", "learning_rate", "batch_size", "epochs", "seed",
                "checkpoint_epochs"});
    cfg.cloud.hidden = get_int_list(cl, "cloud", "hidden", cfg.cloud.hidden);
    parse_train(cl, "cloud", cfg.cloud.train);
    cfg.cloud.train.seed = get_u64(cl, "cloud", "seed", 21);
    cfg.cloud.checkpoint_epochs =
        get_int_list(cl, "cloud", "checkpoint_epochs", cfg.cloud.checkpoint_epochs);

    const json& cf = section(root, "cf", empty);
    check_keys(cf, "cf",
               {"threshold", "metric", "lr", "max_steps", "lambda_init", "lambda_growth",
                "max_escalations", "max_step_norm"});
    cfg.cf.threshold = get_real(cf, "cf", "threshold", cfg.cf.threshold);
    std::string metric = get_str(cf, "cf", "metric", metric_name(cfg.cf.metric));
    try {
        cfg.cf.metric = metric_from_name(metric);
    } catch (const ConfigError&) {
        fail("cf.metric", "unknown metric '" + metric + "'");
    }
    cfg.cf.lr_cf = get_real(cf, "cf", "lr", cfg.cf.lr_cf);
    cfg.cf.max_steps = get_int(cf, "cf", "max_steps", cfg.cf.max_steps);
    cfg.cf.lambda_init = get_real(cf, "cf", "lambda_init", cfg.cf.lambda_init);
    cfg.cf.lambda_growth = get_real(cf, "cf", "lambda_growth", cfg.cf.lambda_growth);
    cfg.cf.max_escalations = get_int(cf, "cf", "max_escalations", cfg.cf.max_escalations);
    cfg.cf.max_step_norm = get_real(cf, "cf", "max_step_norm", cfg.cf.max_step_norm);

    const json& at = section(root, "attack", empty);
    check_keys(at, "attack",
               {"substitute_hidden", "learning_rate", "batch_size", "epochs",
                "paired_batching"});
    cfg.attack.substitute_hidden =
        get_int_list(at, "attack", "substitute_hidden", cfg.attack.substitute_hidden);
    parse_train(at, "attack", cfg.attack.train);
    cfg.attack.paired_batching =
        get_bool(at, "attack", "paired_batching", cfg.attack.paired_batching);

    const json& sw = section(root, "sweep", empty);
    check_keys(sw, "sweep",
               {"strategies", "query_sizes", "runs_per_size", "base_seed", "jobs"});
    if (const json* v = find(sw, "strategies")) {
        if (!v->is_array()) fail("sweep.strategies", "expected an array of strings");
        cfg.sweep.strategies.clear();
        for (const auto& e : *v) {
            if (!e.is_string()) fail("sweep.strategies", "expected an array of strings");
            try {
                cfg.sweep.strategies.push_back(strategy_from_name(e.get<std::string>()));
            } catch (const ConfigError&) {
                fail("sweep.strategies", "unknown strategy '" + e.get<std::string>() + "'");
            }
        }
    }
    cfg.sweep.query_sizes = get_int_list(sw, "sweep", "query_sizes", cfg.sweep.query_sizes);
    cfg.sweep.runs_per_size = get_int(sw, "sweep", "runs_per_size", cfg.sweep.runs_per_size);
    cfg.sweep.base_seed = get_u64(sw, "sweep", "base_seed", cfg.sweep.base_seed);
    cfg.sweep.jobs = get_int(sw, "sweep", "jobs", cfg.sweep.jobs);

    const json& out = section(root, "output", empty);
    check_keys(out, "output", {"dir"});
    cfg.output.dir = get_str(out, "output", "dir", cfg.output.dir);

    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string config_to_json(const RunConfig& cfg) {
    json root;
    json ds;
    ds["kind"] = cfg.dataset.kind;
    if (cfg.dataset.kind == "csv") {
        ds["path"] = cfg.dataset.path;
        ds["label_column"] = cfg.dataset.label_column;
        ds["positive_label"] = cfg.dataset.positive_label;
    } else {
        ds["n"] = cfg.dataset.n;
        ds["seed"] = cfg.dataset.seed;
    }
    ds["split_seed"] = cfg.dataset.split_seed;
    ds["rebalance_ratio"] = cfg.dataset.rebalance_ratio;
    root["dataset"] = ds;

    json cl;
    cl["hidden"] = cfg.cloud.hidden;
    cl["learning_rate"] = cfg.cloud.train.learning_rate;
    cl["batch_size"] = cfg.cloud.train.batch_size;
    cl["epochs"] = cfg.cloud.train.epochs;
    cl["seed"] = cfg.cloud.train.seed;
    cl["checkpoint_epochs"] = cfg.cloud.checkpoint_epochs;
    root["cloud"] = cl;

    json cf;
    cf["threshold"] = cfg.cf.threshold;
    cf["metric"] = metric_name(cfg.cf.metric);
    cf["lr"] = cfg.cf.lr_cf;
    cf["max_steps"] = cfg.cf.max_steps;
    cf["lambda_init"] = cfg.cf.lambda_init;
    cf["lambda_growth"] = cfg.cf.lambda_growth;
    cf["max_escalations"] = cfg.cf.max_escalations;
    cf["max_step_norm"] = cfg.cf.max_step_norm;
    root["cf"] = cf;

    json at;
    at["substitute_hidden"] = cfg.attack.substitute_hidden;
    at["learning_rate"] = cfg.attack.train.learning_rate;
    at["batch_size"] = cfg.attack.train.batch_size;
    at["epochs"] = cfg.attack.train.epochs;
    at["paired_batching"] = cfg.attack.paired_batching;
    root["attack"] = at;

    json sw;
    std::vector<std::string> names;
    for (Strategy s : cfg.sweep.strategies) names.push_back(strategy_name(s));
    sw["strategies"] = names;
    sw["query_sizes"] = cfg.sweep.query_sizes;
    sw["runs_per_size"] = cfg.sweep.runs_per_size;
    sw["base_seed"] = cfg.sweep.base_seed;
    sw["jobs"] = cfg.sweep.jobs;
    root["sweep"] = sw;

    json out;
    out["dir"] = cfg.output.dir;
    root["output"] = out;

    return root.dump(2) + "\n";
}

}  // namespace cfx
