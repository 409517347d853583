#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "canbnn/bitvec.hpp"
#include "canbnn/dense.hpp"
#include "canbnn/featurizer.hpp"
#include "canbnn/frame.hpp"

namespace canbnn {

enum class TaskMode : std::uint8_t { binary = 0, multiclass = 1 };

inline constexpr double kBnEpsilon = 1e-5;

// Sign with sign(0) = +1.
inline double sign_pm1(double x) { return x >= 0.0 ? 1.0 : -1.0; }

// Straight-through estimator: sign'(x) is approximated by the clipped
// identity, 1 when |x| <= 1 and 0 outside.
inline double ste_passthrough(double x) { return (x >= -1.0 && x <= 1.0) ? 1.0 : 0.0; }

struct TrainConfig {
    double learning_rate = 1e-3;
    double scheduler_factor = 0.1;
    int scheduler_patience = 3;
    int max_epochs = 100;
    int early_stop_patience = 6;
    double grad_clip_max_norm = 1.0;
    int batch_size = 256;
    double dropout_rate = 0.2;
    std::uint64_t seed = 0;
    // Absolute validation-loss decrease that counts as improvement for both
    // the plateau scheduler and early stopping.
    double min_improvement = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double bn_momentum = 0.1;

    void validate() const;
};

// One binarized hidden layer: latent real weights (clipped to [-1,1]),
// bias, and batch-norm parameters plus running stats.
struct BnnLayer {
    Matrix weights;  // n_out x n_in latent values
    std::vector<double> bias;
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> run_mean;
    std::vector<double> run_var;
};

// Output layer: binarized weights followed by a per-output real affine
// (scale, shift) that produces real logits.
struct BnnHead {
    Matrix weights;  // n_out x n_in latent values
    std::vector<double> scale;
    std::vector<double> shift;
};

struct BnnModel {
    std::vector<int> topology;  // [D_in, hidden..., D_out]
    TaskMode mode = TaskMode::binary;
    double dropout_rate = 0.2;
    std::uint64_t seed = 0;
    std::uint64_t featurizer_hash = 0;
    std::vector<BnnLayer> layers;
    BnnHead head;

    // Latent weights uniform in [-0.1, 0.1]; gamma = 1, beta = 0,
    // running stats (0, 1); head scale = 1, shift = 0.
    static BnnModel init(const std::vector<int>& topology, TaskMode mode,
                         double dropout_rate, std::uint64_t seed);

    std::size_t input_width() const { return static_cast<std::size_t>(topology.front()); }
    std::size_t output_width() const { return static_cast<std::size_t>(topology.back()); }
    std::size_t hidden_count() const { return layers.size(); }

    // Inference-mode forward over rows of +-1 inputs; returns logits.
    // When hidden_acts is non-null it receives the +-1 activation matrix of
    // every hidden layer.
    Matrix forward_inference(const Matrix& x_pm1,
                             std::vector<Matrix>* hidden_acts = nullptr) const;

    // Class probabilities: one column (sigmoid) in binary mode, a softmax
    // row summing to 1 in multiclass mode.
    Matrix predict_batch(const Matrix& x_pm1) const;
    std::vector<double> predict(const BitVector& x) const;

    void save(const std::filesystem::path& path) const;
    void save(std::ostream& out) const;
    static BnnModel load(const std::filesystem::path& path);
    static BnnModel load(std::istream& in);
    std::string serialize() const;  // checkpoint bytes, for comparisons
};

// Converts feature bits {0,1} to the +-1 row representation used by the
// network (0 -> -1, 1 -> +1).
Matrix to_pm1_matrix(std::span<const FeatureVector> features);
void to_pm1_row(const BitVector& bits, double* row);

struct Dataset {
    Matrix x;            // +-1 rows
    std::vector<int> y;  // class codes (binary mode: 0/1)
};

Dataset make_dataset(std::span<const FeatureVector> features, TaskMode mode);

// Per-layer training cache; exposed so tests can inspect intermediate
// tensors directly.
struct LayerCache {
    Matrix input;     // activations entering the layer
    Matrix pre;       // W_b * input + b
    Matrix xhat;      // batch-normalized pre
    Matrix bn_out;    // gamma * xhat + beta (input of the sign)
    Matrix sign_out;  // +-1 activations
    Matrix output;    // after dropout; input of the next layer
    std::vector<double> mean, var, inv_std;
    std::vector<std::uint8_t> keep_mask;  // dropout keep flags, row-major
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    std::vector<Matrix> binary_weights;  // sign(W) per hidden layer
    Matrix head_input;
    Matrix head_weights;  // sign(head.W)
    Matrix head_z;        // binary dot products before the affine
    Matrix logits;
};

// Training-mode forward: batch statistics, sign activations, dropout.
// Updates running BN stats. Throws on batches smaller than 2.
void forward_train(BnnModel& model, const Matrix& x_pm1, std::mt19937_64& rng,
                   ForwardCache& cache, double bn_momentum = 0.1);

// Gradient tensors in the same order as BnnModel::param_spans().
struct Gradients {
    std::vector<std::vector<double>> tensors;
    double global_norm() const;
    void scale(double s);
};

// Mutable views over every trainable tensor, in a fixed order:
// per hidden layer W, b, gamma, beta; then head W, scale, shift.
std::vector<std::span<double>> param_spans(BnnModel& model);
// Indices within param_spans() that are latent weight matrices (clipped).
std::vector<std::size_t> weight_span_indices(const BnnModel& model);

// Backpropagation with straight-through sign gradients; exact gradients
// elsewhere. grad_logits must match cache.logits in shape.
Gradients backward_ste(const BnnModel& model, const ForwardCache& cache,
                       const Matrix& grad_logits);

// Mean loss and d(loss)/d(logits). Binary: BCE-with-logits on a single
// column against y in {0,1}. Multiclass: softmax cross-entropy.
double loss_and_grad(TaskMode mode, const Matrix& logits, std::span<const int> y,
                     Matrix& grad_logits);

struct EpochLog {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double learning_rate = 0.0;
    double elapsed_s = 0.0;
};

struct TrainHooks {
    // Test instrumentation: replaces the computed validation loss.
    std::function<double(int epoch, double val_loss)> adjust_val_loss;
    // Called after every optimizer step with the gradient norms around
    // clipping and the learning rate in effect.
    std::function<void(int epoch, int batch, double loss, double norm_before_clip,
                       double norm_after_clip, double lr)>
        on_batch;
};

struct TrainResult {
    BnnModel model;  // best validation-loss snapshot
    std::vector<EpochLog> log;
    std::vector<std::string> events;  // lr drops, early stop
    int best_epoch = 0;
    double best_val_loss = 0.0;
};

TrainResult train(const BnnModel& initial, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& config,
                  const TrainHooks& hooks = {});

void write_training_log(std::ostream& out, std::span<const EpochLog> log);

// In-place logits -> probabilities: sigmoid for a single output, softmax
// otherwise. Shared by the real and packed inference paths.
void logits_to_probabilities(double* row, std::size_t n);

// Binary decision: attack iff P(attack) >= tau.
ClassLabel decide_binary(double prob_attack, double tau);
// Argmax with ties broken toward the lowest class code.
ClassLabel decide_multiclass(std::span<const double> probs,
                             const LabelManifest* names = nullptr);

}  // namespace canbnn
