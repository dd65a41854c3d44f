#include "cfx/mlp.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cfx/error.hpp"
#include "cfx/rng.hpp"

namespace cfx {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Identity: return "identity";
    }
    return "?";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "identity") return Activation::Identity;
    throw ConfigError("unknown activation '" + name + "'");
}

void MlpModel::validate() const {
    if (input_dim <= 0) throw ConfigError("model input_dim must be positive");
    if (layers.empty()) throw ConfigError("model has no layers");
    int in = input_dim;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Layer& l = layers[i];
        if (l.W.cols() != in)
            throw ConfigError("layer " + std::to_string(i) + " expects input " +
                              std::to_string(l.W.cols()) + " but gets " +
                              std::to_string(in));
        if (l.W.rows() != l.b.size())
            throw ConfigError("layer " + std::to_string(i) + " weight/bias size mismatch");
        if (!l.W.allFinite() || !l.b.allFinite())
            throw ConfigError("layer " + std::to_string(i) + " has non-finite parameters");
        in = static_cast<int>(l.W.rows());
    }
    if (output_dim() != 1 || layers.back().act != Activation::Sigmoid)
        throw ConfigError("model head must be a single sigmoid unit");
}

bool MlpModel::operator==(const MlpModel& other) const {
    if (input_dim != other.input_dim || layers.size() != other.layers.size())
        return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].act != other.layers[i].act) return false;
        if (layers[i].W.rows() != other.layers[i].W.rows() ||
            layers[i].W.cols() != other.layers[i].W.cols())
            return false;
        if (layers[i].W != other.layers[i].W) return false;
        if (layers[i].b != other.layers[i].b) return false;
    }
    return true;
}

MlpArch make_binary_arch(int input_dim, const std::vector<int>& hidden) {
    MlpArch arch;
    arch.input_dim = input_dim;
    for (int h : hidden) {
        arch.widths.push_back(h);
        arch.acts.push_back(Activation::Relu);
    }
    arch.widths.push_back(1);
    arch.acts.push_back(Activation::Sigmoid);
    return arch;
}

MlpModel mlp_init(const MlpArch& arch, std::uint64_t seed) {
    if (arch.input_dim <= 0) throw ConfigError("arch input_dim must be positive");
    if (arch.widths.empty()) throw ConfigError("arch has no layers");
    if (arch.widths.size() != arch.acts.size())
        throw ConfigError("arch widths/activations length mismatch");
    for (int w : arch.widths)
        if (w <= 0) throw ConfigError("arch widths must be positive");
    if (arch.widths.back() != 1 || arch.acts.back() != Activation::Sigmoid)
        throw ConfigError("arch head must be a single sigmoid unit");

    SplitMix64 rng(seed);
    MlpModel model;
    model.input_dim = arch.input_dim;
    int in = arch.input_dim;
    for (std::size_t i = 0; i < arch.widths.size(); ++i) {
        Layer layer;
        int out = arch.widths[i];
        double bound = 1.0 / std::sqrt(static_cast<double>(in));
        layer.W.resize(out, in);
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c)
                layer.W(r, c) = rng.uniform(-bound, bound);
        layer.b = Eigen::VectorXd::Zero(out);
        layer.act = arch.acts[i];
        model.layers.push_back(std::move(layer));
        in = out;
    }
    model.validate();
    return model;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

double logit_of(double p) { return std::log(p / (1.0 - p)); }

static void apply_activation(Activation act, Eigen::VectorXd& v) {
    switch (act) {
        case Activation::Relu:
            v = v.cwiseMax(0.0);
            break;
        case Activation::Sigmoid:
            for (int i = 0; i < v.size(); ++i) v[i] = sigmoid(v[i]);
            break;
        case Activation::Identity:
            break;
    }
}

// Derivative of the activation given pre-activation z.
static double activation_deriv(Activation act, double z) {
    switch (act) {
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Sigmoid: {
            double s = sigmoid(z);
            return s * (1.0 - s);
        }
        case Activation::Identity: return 1.0;
    }
    return 0.0;
}

static void check_input(const MlpModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.input_dim)
        throw InputError("input has dimension " + std::to_string(x.size()) +
                         ", model expects " + std::to_string(model.input_dim));
    if (!x.allFinite()) throw InputError("input contains non-finite values");
}

double forward_logit(const MlpModel& model, const Eigen::VectorXd& x,
                     ForwardTrace& trace) {
    const std::size_t n = model.layers.size();
    trace.pre.resize(n);
    trace.post.resize(n + 1);
    const Eigen::VectorXd* cur = &x;
    for (std::size_t i = 0; i < n; ++i) {
        const Layer& l = model.layers[i];
        trace.pre[i].noalias() = l.W * (*cur);
        trace.pre[i] += l.b;
        if (i + 1 < n) {
            trace.post[i + 1] = trace.pre[i];
            apply_activation(l.act, trace.post[i + 1]);
            cur = &trace.post[i + 1];
        }
    }
    return trace.pre[n - 1][0];  // head pre-activation; its sigmoid is prob
}

Prediction forward(const MlpModel& model, const Eigen::VectorXd& x) {
    check_input(model, x);
    ForwardTrace trace;
    double z = forward_logit(model, x, trace);
    Prediction pred;
    pred.logit = z;
    pred.prob = sigmoid(z);
    pred.label = pred.prob >= 0.5 ? 1 : 0;
    return pred;
}

double bce_loss(const std::vector<double>& probs, const std::vector<int>& labels) {
    if (probs.empty()) throw InputError("bce_loss: empty batch");
    if (probs.size() != labels.size())
        throw InputError("bce_loss: probs/labels length mismatch");
    constexpr double eps = 1e-12;
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        double p = std::min(std::max(probs[i], eps), 1.0 - eps);
        sum += labels[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
    }
    return sum / static_cast<double>(probs.size());
}

void GradTensors::resize_like(const MlpModel& model) {
    dW.resize(model.layers.size());
    db.resize(model.layers.size());
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        dW[i].resize(model.layers[i].W.rows(), model.layers[i].W.cols());
        db[i].resize(model.layers[i].b.size());
    }
    set_zero();
}

void GradTensors::set_zero() {
    for (auto& m : dW) m.setZero();
    for (auto& v : db) v.setZero();
}

// Accumulates d(mean BCE)/d(params) for one example scaled by `weight`.
// delta convention: dL/dz_head = p - y for BCE composed with sigmoid.
static void backprop_example(const MlpModel& model, const Eigen::VectorXd& x,
                             int y, double weight, ForwardTrace& trace,
                             GradTensors& out) {
    const std::size_t n = model.layers.size();
    double z = forward_logit(model, x, trace);
    double p = sigmoid(z);
    Eigen::VectorXd delta(1);
    delta[0] = (p - static_cast<double>(y)) * weight;
    for (std::size_t li = n; li-- > 0;) {
        const Eigen::VectorXd& input = li == 0 ? x : trace.post[li];
        out.dW[li].noalias() += delta * input.transpose();
        out.db[li] += delta;
        if (li == 0) break;
        Eigen::VectorXd next = model.layers[li].W.transpose() * delta;
        for (int i = 0; i < next.size(); ++i)
            next[i] *= activation_deriv(model.layers[li - 1].act, trace.pre[li - 1][i]);
        delta = std::move(next);
    }
}

GradTensors grad_params(const MlpModel& model, const std::vector<Eigen::VectorXd>& xs,
                        const std::vector<int>& ys) {
    if (xs.empty()) throw InputError("grad_params: empty batch");
    if (xs.size() != ys.size())
        throw InputError("grad_params: features/labels length mismatch");
    GradTensors out;
    out.resize_like(model);
    ForwardTrace trace;
    double w = 1.0 / static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        check_input(model, xs[i]);
        backprop_example(model, xs[i], ys[i], w, trace, out);
    }
    return out;
}

Eigen::VectorXd grad_input_logit(const MlpModel& model, const Eigen::VectorXd& x) {
    check_input(model, x);
    ForwardTrace trace;
    forward_logit(model, x, trace);
    const std::size_t n = model.layers.size();
    Eigen::VectorXd delta(1);
    delta[0] = 1.0;
    for (std::size_t li = n; li-- > 0;) {
        Eigen::VectorXd next = model.layers[li].W.transpose() * delta;
        if (li == 0) return next;
        for (int i = 0; i < next.size(); ++i)
            next[i] *= activation_deriv(model.layers[li - 1].act, trace.pre[li - 1][i]);
        delta = std::move(next);
    }
    return Eigen::VectorXd::Zero(model.input_dim);
}

Eigen::VectorXd grad_input(const MlpModel& model, const Eigen::VectorXd& x,
                           int target_class) {
    Prediction pred = forward(model, x);
    Eigen::VectorXd g = grad_input_logit(model, x);
    double scale = pred.prob * (1.0 - pred.prob);
    if (target_class == 0) scale = -scale;
    return scale * g;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0))
        throw ConfigError("adam_beta1 must be in (0,1)");
    if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0))
        throw ConfigError("adam_beta2 must be in (0,1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
}

void AdamState::resize_like(const MlpModel& model) {
    const std::size_t n = model.layers.size();
    mW.resize(n);
    vW.resize(n);
    mb.resize(n);
    vb.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        mW[i] = Eigen::MatrixXd::Zero(model.layers[i].W.rows(), model.layers[i].W.cols());
        vW[i] = mW[i];
        mb[i] = Eigen::VectorXd::Zero(model.layers[i].b.size());
        vb[i] = mb[i];
    }
    step = 0;
}

void adam_step(MlpModel& model, AdamState& s, const GradTensors& g,
               const TrainConfig& cfg) {
    s.step += 1;
    double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    double corr1 = 1.0 - std::pow(b1, static_cast<double>(s.step));
    double corr2 = 1.0 - std::pow(b2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        s.mW[i] = b1 * s.mW[i] + (1.0 - b1) * g.dW[i];
        s.vW[i] = b2 * s.vW[i] + (1.0 - b2) * g.dW[i].cwiseProduct(g.dW[i]);
        s.mb[i] = b1 * s.mb[i] + (1.0 - b1) * g.db[i];
        s.vb[i] = b2 * s.vb[i] + (1.0 - b2) * g.db[i].cwiseProduct(g.db[i]);
        Eigen::MatrixXd mhat = s.mW[i] / corr1;
        Eigen::MatrixXd vhat = s.vW[i] / corr2;
        model.layers[i].W -=
            cfg.learning_rate *
            mhat.cwiseQuotient(vhat.cwiseSqrt() +
                               Eigen::MatrixXd::Constant(vhat.rows(), vhat.cols(), cfg.adam_eps));
        Eigen::VectorXd mbh = s.mb[i] / corr1;
        Eigen::VectorXd vbh = s.vb[i] / corr2;
        model.layers[i].b -=
            cfg.learning_rate *
            mbh.cwiseQuotient(vbh.cwiseSqrt() +
                              Eigen::VectorXd::Constant(vbh.size(), cfg.adam_eps));
    }
}

MlpModel train_with_order(
    MlpModel model, const std::vector<Eigen::VectorXd>& xs,
    const std::vector<int>& ys, const TrainConfig& cfg,
    const std::function<void(int epoch, std::vector<int>& order)>& make_order,
    const EpochCallback& on_epoch) {
    cfg.validate();
    if (xs.empty()) throw InputError("train: empty dataset");
    if (xs.size() != ys.size()) throw InputError("train: features/labels length mismatch");
    for (const auto& x : xs) check_input(model, x);

    AdamState adam;
    adam.resize_like(model);
    std::vector<int> order;
    std::vector<Eigen::VectorXd> batch_x;
    std::vector<int> batch_y;
    ForwardTrace trace;
    GradTensors grads;
    grads.resize_like(model);

    const std::size_t n = xs.size();
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        make_order(epoch, order);
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
            std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            grads.set_zero();
            double w = 1.0 / static_cast<double>(end - start);
            double batch_loss = 0.0;
            constexpr double eps = 1e-12;
            for (std::size_t k = start; k < end; ++k) {
                int i = order[k];
                double z = forward_logit(model, xs[i], trace);
                double p = sigmoid(z);
                double pc = std::min(std::max(p, eps), 1.0 - eps);
                batch_loss += ys[i] == 1 ? -std::log(pc) : -std::log(1.0 - pc);
                backprop_example(model, xs[i], ys[i], w, trace, grads);
            }
            batch_loss *= w;
            if (!std::isfinite(batch_loss))
                throw TrainingError("training diverged at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(batch_index));
            adam_step(model, adam, grads, cfg);
            loss_sum += batch_loss * static_cast<double>(end - start);
        }
        if (on_epoch) on_epoch(epoch, model, loss_sum / static_cast<double>(n));
    }
    return model;
}

MlpModel train(MlpModel model, const std::vector<Eigen::VectorXd>& xs,
               const std::vector<int>& ys, const TrainConfig& cfg,
               const EpochCallback& on_epoch) {
    std::uint64_t seed = cfg.seed;
    auto make_order = [seed, n = xs.size()](int epoch, std::vector<int>& order) {
        SplitMix64 rng(seed_mix(seed, "epoch-shuffle", static_cast<std::uint64_t>(epoch)));
        order = shuffled_indices(n, rng);
    };
    return train_with_order(std::move(model), xs, ys, cfg, make_order, on_epoch);
}

double train_accuracy(const MlpModel& model, const std::vector<Eigen::VectorXd>& xs,
                      const std::vector<int>& ys) {
    if (xs.empty()) throw InputError("train_accuracy: empty dataset");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (forward(model, xs[i]).label == ys[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(xs.size());
}

// ---- serialization ----

static std::string hex_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

std::string save_model(const MlpModel& model) {
    model.validate();
    std::ostringstream out;
    out << "cfx-mlp 1\n";
    out << "input_dim " << model.input_dim << "\n";
    out << "layers " << model.layers.size() << "\n";
    for (const Layer& l : model.layers) {
        out << "layer " << activation_name(l.act) << " " << l.W.rows() << " "
            << l.W.cols() << "\n";
        for (int r = 0; r < l.W.rows(); ++r) {
            out << "w";
            for (int c = 0; c < l.W.cols(); ++c) out << " " << hex_double(l.W(r, c));
            out << "\n";
        }
        out << "b";
        for (int r = 0; r < l.b.size(); ++r) out << " " << hex_double(l.b[r]);
        out << "\n";
    }
    return out.str();
}

static std::string expect_token(std::istream& in, const char* what) {
    std::string tok;
    if (!(in >> tok)) throw ConfigError(std::string("model file: missing ") + what);
    return tok;
}

static double read_double(std::istream& in, const char* what) {
    std::string tok = expect_token(in, what);
    char* endp = nullptr;
    double v = std::strtod(tok.c_str(), &endp);
    if (endp == tok.c_str() || *endp != '\0')
        throw ConfigError(std::string("model file: bad number for ") + what);
    return v;
}

MlpModel load_model_from_string(const std::string& text) {
    std::istringstream in(text);
    if (expect_token(in, "magic") != "cfx-mlp")
        throw ConfigError("model file: bad magic");
    if (expect_token(in, "version") != "1")
        throw ConfigError("model file: unsupported version");
    MlpModel model;
    if (expect_token(in, "input_dim") != "input_dim")
        throw ConfigError("model file: expected input_dim");
    in >> model.input_dim;
    if (expect_token(in, "layers") != "layers")
        throw ConfigError("model file: expected layers");
    std::size_t n_layers = 0;
    in >> n_layers;
    for (std::size_t i = 0; i < n_layers; ++i) {
        if (expect_token(in, "layer") != "layer")
            throw ConfigError("model file: expected layer");
        Layer l;
        l.act = activation_from_name(expect_token(in, "activation"));
        long rows = 0, cols = 0;
        in >> rows >> cols;
        if (!in || rows <= 0 || cols <= 0)
            throw ConfigError("model file: bad layer shape");
        l.W.resize(rows, cols);
        for (long r = 0; r < rows; ++r) {
            if (expect_token(in, "w") != "w") throw ConfigError("model file: expected w row");
            for (long c = 0; c < cols; ++c) l.W(r, c) = read_double(in, "weight");
        }
        if (expect_token(in, "b") != "b") throw ConfigError("model file: expected bias");
        l.b.resize(rows);
        for (long r = 0; r < rows; ++r) l.b[r] = read_double(in, "bias");
        model.layers.push_back(std::move(l));
    }
    model.validate();
    return model;
}

void save_model_file(const MlpModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open for writing: " + path);
    out << save_model(model);
}

MlpModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open model file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_model_from_string(buf.str());
}

}  // namespace cfx
