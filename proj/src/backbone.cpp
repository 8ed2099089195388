#include "synevo/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "synevo/error.hpp"

namespace synevo {

namespace {

constexpr const char* kPhase = "backbone";

using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

double sign(double x) {
    return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
}

void check_batch_against(const ModelParams& params, const WindowBatch& batch, const GraphSpec& graph) {
    params.check();
    batch.validate();
    const auto& arch = params.arch;
    if (graph.node_count != arch.nodes || graph.normalized.rows() != static_cast<Eigen::Index>(arch.nodes)) {
        throw ShapeError(kPhase, "graph_conv: graph has " + std::to_string(graph.node_count) +
                                     " nodes, model expects " + std::to_string(arch.nodes));
    }
    if (batch.nodes != arch.nodes) {
        throw ShapeError(kPhase, "graph_conv: batch has " + std::to_string(batch.nodes) +
                                     " nodes, model expects " + std::to_string(arch.nodes));
    }
    if (batch.t_in * batch.features != arch.input_dim()) {
        throw ShapeError(kPhase, "graph_conv (W1): window input dim " +
                                     std::to_string(batch.t_in * batch.features) + " != " +
                                     std::to_string(arch.input_dim()));
    }
    if (batch.t_out != arch.t_out) {
        throw ShapeError(kPhase, "readout (W3): window horizon " + std::to_string(batch.t_out) +
                                     " != " + std::to_string(arch.t_out));
    }
}

std::vector<double> effective_params(const ModelParams& params, std::span<const double> activeness) {
    if (activeness.empty()) return params.values;
    if (activeness.size() != params.values.size()) {
        throw ShapeError(kPhase, "activeness length " + std::to_string(activeness.size()) +
                                     " != parameter count " + std::to_string(params.values.size()));
    }
    std::vector<double> out(params.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = params.values[i] * activeness[i];
    return out;
}

struct Activations {
    Matrix mixed;  // Â X, stacked (rows · nodes) × input_dim
    Matrix z1, h1, z2, h2, y;
};

// Stacks Â·X_s for every selected window.
Matrix mix_inputs(const WindowBatch& batch, const GraphSpec& graph, std::span<const std::size_t> rows) {
    const std::size_t n = batch.nodes;
    const std::size_t d = batch.t_in * batch.features;
    Matrix mixed(static_cast<Eigen::Index>(rows.size() * n), static_cast<Eigen::Index>(d));
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto window = batch.input_window(rows[r]);
        for (std::size_t t = 0; t < batch.t_in; ++t)
            for (std::size_t node = 0; node < n; ++node)
                for (std::size_t f = 0; f < batch.features; ++f)
                    x(node, t * batch.features + f) = window[(t * n + node) * batch.features + f];
        mixed.middleRows(static_cast<Eigen::Index>(r * n), static_cast<Eigen::Index>(n)).noalias() =
            graph.normalized * x;
    }
    return mixed;
}

Activations run_forward(const ArchConfig& arch, std::span<const double> theta, const WindowBatch& batch,
                        const GraphSpec& graph, std::span<const std::size_t> rows) {
    const auto layout = layer_layout(arch);
    auto map = [&](Layer l) {
        const auto& s = layout[static_cast<std::size_t>(l)];
        return ConstMap(theta.data() + s.offset, static_cast<Eigen::Index>(s.rows),
                        static_cast<Eigen::Index>(s.cols));
    };
    Activations a;
    a.mixed = mix_inputs(batch, graph, rows);
    a.z1.noalias() = a.mixed * map(Layer::W1);
    a.z1.rowwise() += map(Layer::b1).row(0);
    a.h1 = a.z1.cwiseMax(0.0);
    a.z2.noalias() = a.h1 * map(Layer::W2);
    a.z2.rowwise() += map(Layer::b2).row(0);
    a.h2 = a.z2.cwiseMax(0.0);
    a.y.noalias() = a.h2 * map(Layer::W3);
    a.y.rowwise() += map(Layer::b3).row(0);
    return a;
}

std::vector<std::size_t> all_rows(std::size_t count) {
    std::vector<std::size_t> rows(count);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace

Matrix normalize_adjacency(const Matrix& adjacency) {
    if (adjacency.rows() != adjacency.cols() || adjacency.rows() == 0) {
        throw ShapeError(kPhase, "adjacency must be a non-empty square matrix");
    }
    const Eigen::Index n = adjacency.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!(adjacency(i, j) >= 0.0) || !std::isfinite(adjacency(i, j)))
                throw ShapeError(kPhase, "adjacency entries must be finite and nonnegative");
            if (adjacency(i, j) != adjacency(j, i))
                throw ShapeError(kPhase, "adjacency must be symmetric");
        }
    }
    Matrix with_loops = adjacency + Matrix::Identity(n, n);
    Eigen::VectorXd inv_sqrt_degree = with_loops.rowwise().sum().cwiseSqrt().cwiseInverse();
    return inv_sqrt_degree.asDiagonal() * with_loops * inv_sqrt_degree.asDiagonal();
}

GraphSpec GraphSpec::from_adjacency(Matrix adjacency) {
    GraphSpec g;
    g.normalized = normalize_adjacency(adjacency);
    g.node_count = static_cast<std::size_t>(adjacency.rows());
    g.adjacency = std::move(adjacency);
    return g;
}

// ---------------------------------------------------------------- WindowBatch

WindowBatch::WindowBatch(std::size_t t_in_, std::size_t t_out_, std::size_t nodes_, std::size_t features_)
    : t_in(t_in_), t_out(t_out_), nodes(nodes_), features(features_) {}

std::size_t WindowBatch::size() const {
    const std::size_t stride = target_stride();
    return stride == 0 ? 0 : targets.size() / stride;
}

std::span<const double> WindowBatch::input_window(std::size_t sample) const {
    return {inputs.data() + sample * input_stride(), input_stride()};
}

std::span<const double> WindowBatch::target_window(std::size_t sample) const {
    return {targets.data() + sample * target_stride(), target_stride()};
}

std::span<const double> WindowBatch::mask_window(std::size_t sample) const {
    return {mask.data() + sample * target_stride(), target_stride()};
}

void WindowBatch::append(std::span<const double> input, std::span<const double> target,
                         std::span<const double> m) {
    if (input.size() != input_stride() || target.size() != target_stride() || m.size() != target_stride())
        throw ShapeError(kPhase, "window does not match batch layout");
    inputs.insert(inputs.end(), input.begin(), input.end());
    targets.insert(targets.end(), target.begin(), target.end());
    mask.insert(mask.end(), m.begin(), m.end());
}

void WindowBatch::append_all(const WindowBatch& other) {
    if (other.t_in != t_in || other.t_out != t_out || other.nodes != nodes || other.features != features)
        throw ShapeError(kPhase, "cannot concatenate batches with different layouts");
    inputs.insert(inputs.end(), other.inputs.begin(), other.inputs.end());
    targets.insert(targets.end(), other.targets.begin(), other.targets.end());
    mask.insert(mask.end(), other.mask.begin(), other.mask.end());
}

WindowBatch WindowBatch::select(std::span<const std::size_t> rows) const {
    WindowBatch out(t_in, t_out, nodes, features);
    out.inputs.reserve(rows.size() * input_stride());
    out.targets.reserve(rows.size() * target_stride());
    out.mask.reserve(rows.size() * target_stride());
    for (std::size_t r : rows) out.append(input_window(r), target_window(r), mask_window(r));
    return out;
}

void WindowBatch::validate() const {
    if (t_in == 0 || t_out == 0 || nodes == 0 || features == 0)
        throw ShapeError(kPhase, "window dimensions must be positive");
    if (targets.size() % target_stride() != 0 || mask.size() != targets.size() ||
        inputs.size() != size() * input_stride())
        throw ShapeError(kPhase, "window buffers are inconsistent with the declared layout");
}

// ---------------------------------------------------------------- parameters

std::size_t ArchConfig::param_count() const {
    return input_dim() * hidden1 + hidden1 + hidden1 * hidden2 + hidden2 + hidden2 * t_out + t_out;
}

std::vector<LayerShape> layer_layout(const ArchConfig& arch) {
    std::vector<LayerShape> out{
        {"W1", arch.input_dim(), arch.hidden1, 0},
        {"b1", 1, arch.hidden1, 0},
        {"W2", arch.hidden1, arch.hidden2, 0},
        {"b2", 1, arch.hidden2, 0},
        {"W3", arch.hidden2, arch.t_out, 0},
        {"b3", 1, arch.t_out, 0},
    };
    std::size_t offset = 0;
    for (auto& s : out) {
        s.offset = offset;
        offset += s.size();
    }
    return out;
}

ModelParams ModelParams::zeros(const ArchConfig& arch) {
    return ModelParams{arch, std::vector<double>(arch.param_count(), 0.0)};
}

ModelParams ModelParams::random(const ArchConfig& arch, std::uint64_t seed) {
    ModelParams p = zeros(arch);
    std::mt19937_64 rng(seed);
    for (const auto& s : layer_layout(arch)) {
        if (s.rows == 1) continue;  // biases stay zero
        const double bound = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t i = 0; i < s.size(); ++i) p.values[s.offset + i] = dist(rng);
    }
    return p;
}

std::span<double> ModelParams::layer(Layer which) {
    const auto s = layer_layout(arch)[static_cast<std::size_t>(which)];
    return {values.data() + s.offset, s.size()};
}

std::span<const double> ModelParams::layer(Layer which) const {
    const auto s = layer_layout(arch)[static_cast<std::size_t>(which)];
    return {values.data() + s.offset, s.size()};
}

std::vector<std::vector<double>> ModelParams::unflatten() const {
    check();
    std::vector<std::vector<double>> out;
    for (const auto& s : layer_layout(arch))
        out.emplace_back(values.begin() + static_cast<std::ptrdiff_t>(s.offset),
                         values.begin() + static_cast<std::ptrdiff_t>(s.offset + s.size()));
    return out;
}

ModelParams ModelParams::flatten(const ArchConfig& arch, const std::vector<std::vector<double>>& layers) {
    const auto layout = layer_layout(arch);
    if (layers.size() != layout.size()) throw ShapeError(kPhase, "expected 6 parameter tensors");
    ModelParams p{arch, {}};
    p.values.reserve(arch.param_count());
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (layers[i].size() != layout[i].size())
            throw ShapeError(kPhase, "layer " + layout[i].name + " has " + std::to_string(layers[i].size()) +
                                         " entries, expected " + std::to_string(layout[i].size()));
        p.values.insert(p.values.end(), layers[i].begin(), layers[i].end());
    }
    return p;
}

void ModelParams::check() const {
    if (values.size() != arch.param_count())
        throw ShapeError(kPhase, "flattened view has " + std::to_string(values.size()) + " entries, architecture needs " +
                                     std::to_string(arch.param_count()));
}

// ---------------------------------------------------------------- forward / loss / backward

std::vector<double> forward(const ModelParams& params, const WindowBatch& batch, const GraphSpec& graph,
                            std::span<const double> activeness) {
    check_batch_against(params, batch, graph);
    const auto theta = effective_params(params, activeness);
    const auto rows = all_rows(batch.size());
    const auto a = run_forward(params.arch, theta, batch, graph, rows);

    const std::size_t n = batch.nodes;
    std::vector<double> pred(batch.size() * batch.target_stride());
    for (std::size_t s = 0; s < batch.size(); ++s)
        for (std::size_t node = 0; node < n; ++node)
            for (std::size_t t = 0; t < batch.t_out; ++t)
                pred[(s * batch.t_out + t) * n + node] =
                    a.y(static_cast<Eigen::Index>(s * n + node), static_cast<Eigen::Index>(t));
    return pred;
}

double masked_mae_loss(std::span<const double> pred, std::span<const double> target, std::span<const double> mask) {
    if (pred.size() != target.size() || pred.size() != mask.size())
        throw ShapeError(kPhase, "masked_mae_loss: prediction, target and mask sizes differ");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        num += std::abs(pred[i] - target[i]) * mask[i];
        den += mask[i];
    }
    if (!(den > 0.0)) throw Error(kPhase, "masked_mae_loss: mask selects no entries");
    return num / den;
}

LossGradient backward(const ModelParams& params, const WindowBatch& batch, const GraphSpec& graph,
                      std::span<const double> activeness, std::span<const std::size_t> rows_in) {
    check_batch_against(params, batch, graph);
    const auto theta = effective_params(params, activeness);
    std::vector<std::size_t> owned;
    std::span<const std::size_t> rows = rows_in;
    if (rows.empty()) {
        owned = all_rows(batch.size());
        rows = owned;
    }
    const auto a = run_forward(params.arch, theta, batch, graph, rows);
    const std::size_t n = batch.nodes;
    const auto T = static_cast<Eigen::Index>(batch.t_out);

    double mask_sum = 0.0;
    for (std::size_t r : rows)
        for (double m : batch.mask_window(r)) mask_sum += m;
    if (!(mask_sum > 0.0)) throw Error(kPhase, "masked_mae_loss: mask selects no entries");

    // dL/dŶ in the stacked (rows·nodes) × t_out layout.
    Matrix g(a.y.rows(), T);
    double abs_sum = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto target = batch.target_window(rows[r]);
        auto mask = batch.mask_window(rows[r]);
        for (std::size_t node = 0; node < n; ++node) {
            const auto row = static_cast<Eigen::Index>(r * n + node);
            for (Eigen::Index t = 0; t < T; ++t) {
                const std::size_t k = static_cast<std::size_t>(t) * n + node;
                const double e = a.y(row, t) - target[k];
                abs_sum += std::abs(e) * mask[k];
                g(row, t) = sign(e) * mask[k] / mask_sum;
            }
        }
    }

    const auto layout = layer_layout(params.arch);
    auto weight = [&](Layer l) {
        const auto& s = layout[static_cast<std::size_t>(l)];
        return ConstMap(theta.data() + s.offset, static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
    };
    LossGradient out;
    out.loss = abs_sum / mask_sum;
    out.gradient.assign(params.values.size(), 0.0);
    auto grad = [&](Layer l) {
        const auto& s = layout[static_cast<std::size_t>(l)];
        return MutMap(out.gradient.data() + s.offset, static_cast<Eigen::Index>(s.rows),
                      static_cast<Eigen::Index>(s.cols));
    };

    grad(Layer::W3).noalias() = a.h2.transpose() * g;
    grad(Layer::b3) = g.colwise().sum();
    Matrix dz2 = (g * weight(Layer::W3).transpose()).cwiseProduct((a.z2.array() > 0.0).cast<double>().matrix());
    grad(Layer::W2).noalias() = a.h1.transpose() * dz2;
    grad(Layer::b2) = dz2.colwise().sum();
    Matrix dz1 = (dz2 * weight(Layer::W2).transpose()).cwiseProduct((a.z1.array() > 0.0).cast<double>().matrix());
    grad(Layer::W1).noalias() = a.mixed.transpose() * dz1;
    grad(Layer::b1) = dz1.colwise().sum();

    if (!activeness.empty())
        for (std::size_t i = 0; i < out.gradient.size(); ++i) out.gradient[i] *= activeness[i];
    return out;
}

// ---------------------------------------------------------------- optimizer

OptimizerState OptimizerState::init(std::size_t size, double learning_rate, double weight_decay) {
    if (!(learning_rate > 0.0)) throw Error(kPhase, "learning rate must be positive");
    if (!(weight_decay >= 0.0)) throw Error(kPhase, "weight decay must be nonnegative");
    OptimizerState s;
    s.first_moment.assign(size, 0.0);
    s.second_moment.assign(size, 0.0);
    s.learning_rate = learning_rate;
    s.weight_decay = weight_decay;
    return s;
}

void adam_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
               std::span<const std::uint8_t> active) {
    if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size() || (!active.empty() && active.size() != params.size()))
        throw ShapeError(kPhase, "adam_step: parameter, gradient and moment lengths differ");
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!active.empty() && active[i] == 0) continue;
        const double g = grads[i] + 2.0 * state.weight_decay * params[i];
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        const double m_hat = m / correction1;
        const double v_hat = v / correction2;
        params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

// ---------------------------------------------------------------- training loop

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t count, std::size_t batch_size,
                                                       std::mt19937_64& rng) {
    if (batch_size == 0) throw Error(kPhase, "batch size must be positive");
    auto order = all_rows(count);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < count; start += batch_size) {
        const std::size_t stop = std::min(count, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return batches;
}

TrainResult train_to_convergence(ModelParams init, const WindowBatch& data, const GraphSpec& graph,
                                 double learning_rate, double weight_decay,
                                 const ConvergenceConfig& convergence) {
    if (data.empty()) throw Error(kPhase, "train_to_convergence: no training windows");
    TrainResult result;
    result.params = std::move(init);
    auto state = OptimizerState::init(result.params.values.size(), learning_rate, weight_decay);
    std::mt19937_64 rng(convergence.seed);

    std::size_t stalled = 0;
    for (std::size_t epoch = 0; epoch < convergence.max_epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (const auto& rows : shuffled_batches(data.size(), convergence.batch_size, rng)) {
            double mask_sum = 0.0;
            for (std::size_t r : rows)
                for (double m : data.mask_window(r)) mask_sum += m;
            if (mask_sum == 0.0) continue;  // fully missing batch carries no signal
            auto lg = backward(result.params, data, graph, {}, rows);
            if (!std::isfinite(lg.loss) || !all_finite(lg.gradient))
                throw DivergenceError(kPhase, "loss diverged at epoch " + std::to_string(epoch), result.trace);
            adam_step(result.params.values, lg.gradient, state);
            loss_sum += lg.loss;
            ++batches;
        }
        const double epoch_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
        if (!std::isfinite(epoch_loss) || !all_finite(result.params.values))
            throw DivergenceError(kPhase, "loss diverged at epoch " + std::to_string(epoch), result.trace);
        if (!result.trace.empty()) {
            const double prev = result.trace.back();
            const double improvement = prev > 0.0 ? (prev - epoch_loss) / prev : 0.0;
            stalled = improvement < convergence.rel_tol ? stalled + 1 : 0;
        }
        result.trace.push_back(epoch_loss);
        if (stalled >= convergence.patience) break;
    }

    auto final_lg = backward(result.params, data, graph);
    if (!std::isfinite(final_lg.loss)) throw DivergenceError(kPhase, "final loss is not finite", result.trace);
    result.gradient = std::move(final_lg.gradient);
    result.final_loss = final_lg.loss;
    return result;
}

} // namespace synevo
