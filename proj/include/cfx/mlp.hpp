// Minimal deterministic MLP engine: dense layers, exact backprop for both
// parameter and input gradients, BCE loss, Adam. Binary head only (single
// sigmoid output); everything is seeded and replays bit-identically.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cfx {

enum class Activation { Relu, Sigmoid, Identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct Layer {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;  // out
    Activation act = Activation::Identity;
};

struct MlpModel {
    int input_dim = 0;
    std::vector<Layer> layers;

    int output_dim() const {
        return layers.empty() ? 0 : static_cast<int>(layers.back().W.rows());
    }
    // Throws ConfigError if layer dimensions do not chain, the head is not a
    // single sigmoid unit, or any parameter is non-finite.
    void validate() const;

    bool operator==(const MlpModel& other) const;
};

struct MlpArch {
    int input_dim = 0;
    std::vector<int> widths;        // output width per layer, last must be 1
    std::vector<Activation> acts;   // one per layer, last must be Sigmoid
};

// Standard binary classifier arch: ReLU hidden layers + sigmoid unit head.
MlpArch make_binary_arch(int input_dim, const std::vector<int>& hidden);

// Weights ~ uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero, drawn
// row-major from a SplitMix64 stream. Same (arch, seed) => bit-identical model.
MlpModel mlp_init(const MlpArch& arch, std::uint64_t seed);

struct Prediction {
    double prob = 0.0;   // p(class 1 | x)
    double logit = 0.0;
    int label = 0;       // 1 iff prob >= 0.5
};

double sigmoid(double z);
double logit_of(double p);  // inverse sigmoid

Prediction forward(const MlpModel& model, const Eigen::VectorXd& x);

// Reusable buffers so hot loops (CF search, training) do not reallocate.
struct ForwardTrace {
    std::vector<Eigen::VectorXd> pre;   // pre-activation per layer
    std::vector<Eigen::VectorXd> post;  // post-activation; post[0] is unused
};

// Raw output logit; trace receives intermediate activations for backprop.
double forward_logit(const MlpModel& model, const Eigen::VectorXd& x,
                     ForwardTrace& trace);

// Mean of -[y log p + (1-y) log(1-p)] with p clamped to [1e-12, 1 - 1e-12].
double bce_loss(const std::vector<double>& probs, const std::vector<int>& labels);

struct GradTensors {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;

    void resize_like(const MlpModel& model);
    void set_zero();
};

// Exact gradient of the mean BCE over the batch w.r.t. every weight and bias.
GradTensors grad_params(const MlpModel& model,
                        const std::vector<Eigen::VectorXd>& xs,
                        const std::vector<int>& ys);

// Gradient of p(target_class | x) w.r.t. x.
Eigen::VectorXd grad_input(const MlpModel& model, const Eigen::VectorXd& x,
                           int target_class);

// Gradient of the output logit w.r.t. x (does not saturate with the sigmoid).
Eigen::VectorXd grad_input_logit(const MlpModel& model, const Eigen::VectorXd& x);

struct TrainConfig {
    double learning_rate = 0.005;
    int batch_size = 32;
    int epochs = 200;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;  // ConfigError on nonsense values
};

struct AdamState {
    std::vector<Eigen::MatrixXd> mW, vW;
    std::vector<Eigen::VectorXd> mb, vb;
    long step = 0;

    void resize_like(const MlpModel& model);
};

void adam_step(MlpModel& model, AdamState& state, const GradTensors& grads,
               const TrainConfig& cfg);

// Called after each epoch with the current model and the epoch-mean loss.
using EpochCallback =
    std::function<void(int epoch, const MlpModel& model, double mean_loss)>;

// Runs cfg.epochs full passes with a per-epoch seeded shuffle; the last
// incomplete batch is kept. Throws TrainingError (naming epoch/batch) if the
// loss turns non-finite.
MlpModel train(MlpModel model, const std::vector<Eigen::VectorXd>& xs,
               const std::vector<int>& ys, const TrainConfig& cfg,
               const EpochCallback& on_epoch = {});

// Same optimizer loop with a caller-supplied epoch ordering. `make_order`
// must fill `order` with a permutation of [0, n); used by attack training to
// keep CF/CCF pairs inside one batch.
MlpModel train_with_order(
    MlpModel model, const std::vector<Eigen::VectorXd>& xs,
    const std::vector<int>& ys, const TrainConfig& cfg,
    const std::function<void(int epoch, std::vector<int>& order)>& make_order,
    const EpochCallback& on_epoch = {});

// Fraction of points whose predicted label matches ys.
double train_accuracy(const MlpModel& model, const std::vector<Eigen::VectorXd>& xs,
                      const std::vector<int>& ys);

// Versioned text format; hexfloat payload makes round-trips bit-exact.
std::string save_model(const MlpModel& model);
MlpModel load_model_from_string(const std::string& text);
void save_model_file(const MlpModel& model, const std::string& path);
MlpModel load_model_file(const std::string& path);

}  // namespace cfx
