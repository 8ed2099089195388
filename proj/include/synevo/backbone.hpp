#pragma once

// Small graph-temporal predictor used as the shared model everywhere else:
//
//   H1 = relu(Â · X_flat · W1 + b1)
//   H2 = relu(H1 · W2 + b2)
//   Ŷ  = H2 · W3 + b3
//
// X_flat is one window with the T_in × features axes folded into the feature
// axis of every node, so a window is an N × (T_in·F) matrix and the readout
// emits all T_out horizons at once.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace synevo {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// D^{-1/2}(A+I)D^{-1/2}, D the degree diagonal of A+I.
Matrix normalize_adjacency(const Matrix& adjacency);

struct GraphSpec {
    std::size_t node_count = 0;
    Matrix adjacency;
    Matrix normalized;

    static GraphSpec from_adjacency(Matrix adjacency);
};

/// Dense windows. Layouts are row-major:
///   inputs  count × t_in × nodes × features
///   targets count × t_out × nodes
///   mask    count × t_out × nodes, entries in {0,1}
struct WindowBatch {
    std::size_t t_in = 0;
    std::size_t t_out = 0;
    std::size_t nodes = 0;
    std::size_t features = 1;
    std::vector<double> inputs;
    std::vector<double> targets;
    std::vector<double> mask;

    WindowBatch() = default;
    WindowBatch(std::size_t t_in, std::size_t t_out, std::size_t nodes, std::size_t features = 1);

    std::size_t size() const;
    bool empty() const { return size() == 0; }
    std::size_t input_stride() const { return t_in * nodes * features; }
    std::size_t target_stride() const { return t_out * nodes; }

    std::span<const double> input_window(std::size_t sample) const;
    std::span<const double> target_window(std::size_t sample) const;
    std::span<const double> mask_window(std::size_t sample) const;

    void append(std::span<const double> input, std::span<const double> target,
                std::span<const double> mask);
    void append_all(const WindowBatch& other);
    WindowBatch select(std::span<const std::size_t> rows) const;
    void validate() const;
};

struct ArchConfig {
    std::size_t nodes = 1;
    std::size_t features = 1;
    std::size_t t_in = 12;
    std::size_t t_out = 12;
    std::size_t hidden1 = 32;
    std::size_t hidden2 = 32;

    std::size_t input_dim() const { return t_in * features; }
    std::size_t param_count() const;
    bool operator==(const ArchConfig&) const = default;
};

struct LayerShape {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;
    std::size_t size() const { return rows * cols; }
};

/// W1, b1, W2, b2, W3, b3 in that order; biases are 1 × width.
std::vector<LayerShape> layer_layout(const ArchConfig& arch);

enum class Layer : std::size_t { W1 = 0, b1, W2, b2, W3, b3 };
inline constexpr std::size_t kLayerCount = 6;

struct ModelParams {
    ArchConfig arch;
    std::vector<double> values;  // flattened view, layers concatenated row-major

    static ModelParams zeros(const ArchConfig& arch);
    /// Glorot-uniform weights, zero biases.
    static ModelParams random(const ArchConfig& arch, std::uint64_t seed);

    std::span<double> layer(Layer which);
    std::span<const double> layer(Layer which) const;

    std::vector<std::vector<double>> unflatten() const;
    static ModelParams flatten(const ArchConfig& arch, const std::vector<std::vector<double>>& layers);

    void check() const;
};

/// Ŷ as count × t_out × nodes. `activeness`, when non-empty, multiplies the
/// flattened parameters elementwise before use.
std::vector<double> forward(const ModelParams& params, const WindowBatch& batch, const GraphSpec& graph,
                            std::span<const double> activeness = {});

/// Σ|pred−target|·mask / Σmask.
double masked_mae_loss(std::span<const double> pred, std::span<const double> target,
                       std::span<const double> mask);

struct LossGradient {
    double loss = 0.0;
    std::vector<double> gradient;  // same layout as ModelParams::values
};

/// Masked-MAE loss and its exact gradient w.r.t. the flattened parameters.
/// sign(0) = 0 for both |·| and relu. `rows` restricts to a subset of windows
/// (all windows when empty).
LossGradient backward(const ModelParams& params, const WindowBatch& batch, const GraphSpec& graph,
                      std::span<const double> activeness = {}, std::span<const std::size_t> rows = {});

struct OptimizerState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step_count = 0;
    double learning_rate = 0.01;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static OptimizerState init(std::size_t size, double learning_rate, double weight_decay = 0.0);
};

/// Adam with bias correction. Weight decay enters as 2·λ·θ added to the
/// gradient (the derivative of λ‖θ‖²). Entries with active[i] == 0 are left
/// untouched, moments included.
void adam_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
               std::span<const std::uint8_t> active = {});

struct ConvergenceConfig {
    double rel_tol = 1e-4;
    std::size_t patience = 5;
    std::size_t max_epochs = 100;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

struct TrainResult {
    ModelParams params;
    std::vector<double> trace;     // epoch mean loss
    std::vector<double> gradient;  // full-set gradient at the final parameters
    double final_loss = 0.0;       // full-set loss at the final parameters
};

/// Mini-batch Adam until the epoch mean loss stops improving by rel_tol for
/// `patience` consecutive epochs, or max_epochs. Throws DivergenceError on a
/// non-finite loss.
TrainResult train_to_convergence(ModelParams init, const WindowBatch& data, const GraphSpec& graph,
                                 double learning_rate, double weight_decay,
                                 const ConvergenceConfig& convergence);

/// Row indices of `count` samples shuffled and cut into batches.
std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t count, std::size_t batch_size,
                                                       std::mt19937_64& rng);

} // namespace synevo
