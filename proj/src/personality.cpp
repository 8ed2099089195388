#include "synevo/personality.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "synevo/error.hpp"

namespace synevo::personality {

namespace {

constexpr const char* kPhase = "personality";

using ConstVec = Eigen::Map<const Eigen::VectorXd>;

double aggregate(double sum_sq, std::size_t n, DistanceKind kind) {
    return kind == DistanceKind::mse ? sum_sq / static_cast<double>(n) : sum_sq;
}

} // namespace

DistanceKind distance_kind_from_string(const std::string& name) {
    if (name == "mse") return DistanceKind::mse;
    if (name == "sum_sq" || name == "sum-of-squares") return DistanceKind::sum_sq;
    throw Error(kPhase, "unknown distance '" + name + "'");
}

std::string to_string(DistanceKind kind) { return kind == DistanceKind::mse ? "mse" : "sum_sq"; }

double distance(std::span<const double> a, std::span<const double> b, DistanceKind kind) {
    if (a.size() != b.size())
        throw ShapeError(kPhase, "distance: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    if (a.empty()) throw ShapeError(kPhase, "distance: empty vectors");
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sq += d * d;
    }
    return aggregate(sq, a.size(), kind);
}

Extractor Extractor::init(std::size_t embed_dim, std::size_t input_dim, std::uint64_t seed, double margin,
                          DistanceKind distance) {
    if (embed_dim == 0 || input_dim == 0) throw ShapeError(kPhase, "extractor dimensions must be positive");
    if (!(margin > 0.0)) throw Error(kPhase, "margin must be positive");
    Extractor e;
    e.weights.resize(static_cast<Eigen::Index>(embed_dim), static_cast<Eigen::Index>(input_dim));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(input_dim)));
    for (Eigen::Index i = 0; i < e.weights.size(); ++i) e.weights.data()[i] = dist(rng);
    e.margin = margin;
    e.distance = distance;
    return e;
}

std::vector<double> Extractor::apply(std::span<const double> window) const {
    if (window.size() != input_dim())
        throw ShapeError(kPhase, "extractor expects input_dim " + std::to_string(input_dim()) + ", got " +
                                     std::to_string(window.size()));
    std::vector<double> out(embed_dim());
    Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())).noalias() =
        weights * ConstVec(window.data(), static_cast<Eigen::Index>(window.size()));
    return out;
}

DomainEmbedding embed_windows(const Extractor& extractor, const std::string& group_id, const WindowBatch& windows) {
    if (windows.empty()) throw Error(kPhase, "embed: group " + group_id + " has no windows");
    if (windows.input_stride() != extractor.input_dim())
        throw ShapeError(kPhase, "embed: group " + group_id + " windows have " + std::to_string(windows.input_stride()) +
                                     " inputs, extractor expects " + std::to_string(extractor.input_dim()));
    // W·mean(x) equals mean(W·x) for a linear map.
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(windows.input_stride()));
    for (std::size_t s = 0; s < windows.size(); ++s) {
        auto w = windows.input_window(s);
        mean += ConstVec(w.data(), static_cast<Eigen::Index>(w.size()));
    }
    mean /= static_cast<double>(windows.size());
    DomainEmbedding e;
    e.group_id = group_id;
    e.sample_count = windows.size();
    e.vector = extractor.apply(std::span<const double>(mean.data(), static_cast<std::size_t>(mean.size())));
    return e;
}

WindowBatch standardized(const WindowBatch& windows) {
    WindowBatch out = windows;
    if (out.inputs.empty()) return out;
    const auto n = static_cast<double>(out.inputs.size());
    double mean = 0.0;
    for (double v : out.inputs) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : out.inputs) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    const double inv = sd > 0.0 ? 1.0 / sd : 0.0;
    for (double& v : out.inputs) v = (v - mean) * inv;
    return out;
}

DomainEmbedding embed(const Extractor& extractor, const DomainGroup& group) {
    return embed_windows(extractor, group.group_id, group.train);
}

double contrastive_loss(std::span<const double> e_i, std::span<const double> e_j, bool same_domain, double margin,
                        DistanceKind kind) {
    if (!(margin > 0.0)) throw Error(kPhase, "contrastive_loss: margin must be positive");
    const double d = distance(e_i, e_j, kind);
    return same_domain ? d : std::max(0.0, margin - d);
}

double contrastive_objective(const Extractor& extractor, std::span<const SamplePair> pairs) {
    if (pairs.empty()) return 0.0;
    double total = 0.0;
    for (const auto& p : pairs)
        total += contrastive_loss(extractor.apply(p.a), extractor.apply(p.b), p.same_domain, extractor.margin,
                                  extractor.distance);
    return total / static_cast<double>(pairs.size());
}

Matrix contrastive_gradient(const Extractor& extractor, std::span<const SamplePair> pairs) {
    Matrix grad = Matrix::Zero(extractor.weights.rows(), extractor.weights.cols());
    if (pairs.empty()) return grad;
    const auto dim = static_cast<Eigen::Index>(extractor.input_dim());
    const double norm = extractor.distance == DistanceKind::mse ? static_cast<double>(extractor.embed_dim()) : 1.0;
    Eigen::VectorXd delta(dim);
    for (const auto& p : pairs) {
        if (p.a.size() != extractor.input_dim() || p.b.size() != extractor.input_dim())
            throw ShapeError(kPhase, "contrastive_gradient: pair dimension mismatch");
        delta = ConstVec(p.a.data(), dim) - ConstVec(p.b.data(), dim);
        const Eigen::VectorXd projected = extractor.weights * delta;
        const double d = projected.squaredNorm() / norm;
        // dD/dW = (2/norm)·(Wδ)δᵀ
        double coeff = 0.0;
        if (p.same_domain) coeff = 1.0;
        else if (d < extractor.margin) coeff = -1.0;
        if (coeff != 0.0) grad.noalias() += (coeff * 2.0 / norm) * projected * delta.transpose();
    }
    grad /= static_cast<double>(pairs.size());
    return grad;
}

std::vector<double> train_extractor(Extractor& extractor, std::span<const DomainGroup* const> groups,
                                    const PairSampling& sampling, std::size_t epochs) {
    std::vector<double> trace;
    if (epochs == 0) return trace;
    if (groups.empty()) throw Error(kPhase, "train_extractor: no groups");
    for (const auto* g : groups)
        if (g->train.size() < 2) throw Error(kPhase, "train_extractor: group " + g->group_id + " needs 2+ windows");

    std::mt19937_64 rng(sampling.seed);
    auto state = OptimizerState::init(static_cast<std::size_t>(extractor.weights.size()), sampling.learning_rate);
    std::uniform_int_distribution<std::size_t> pick_group(0, groups.size() - 1);
    auto pick_window = [&](const WindowBatch& w) {
        std::uniform_int_distribution<std::size_t> d(0, w.size() - 1);
        return d(rng);
    };

    std::vector<SamplePair> pairs;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        pairs.clear();
        for (std::size_t k = 0; k < sampling.pairs_per_epoch; ++k) {
            const bool positive = groups.size() == 1 || k % 2 == 0;
            const std::size_t gi = pick_group(rng);
            std::size_t gj = gi;
            if (!positive) {
                std::uniform_int_distribution<std::size_t> other(0, groups.size() - 2);
                gj = other(rng);
                if (gj >= gi) ++gj;
            }
            const auto& a = groups[gi]->train;
            const auto& b = groups[gj]->train;
            const std::size_t wa = pick_window(a);
            std::size_t wb = pick_window(b);
            if (positive && wb == wa) wb = (wb + 1) % b.size();
            pairs.push_back({a.input_window(wa), b.input_window(wb), positive});
        }
        const double loss = contrastive_objective(extractor, pairs);
        if (!std::isfinite(loss)) throw DivergenceError(kPhase, "extractor loss diverged", trace);
        const Matrix grad = contrastive_gradient(extractor, pairs);
        adam_step(std::span<double>(extractor.weights.data(), static_cast<std::size_t>(extractor.weights.size())),
                  std::span<const double>(grad.data(), static_cast<std::size_t>(grad.size())), state);
        if (!extractor.weights.allFinite()) throw DivergenceError(kPhase, "extractor weights diverged", trace);
        trace.push_back(loss);
    }
    return trace;
}

Extractor reinstantiate(const Extractor& extractor) {
    Extractor next = extractor;
    ++next.generation;
    return next;
}

nlohmann::json extractor_to_json(const Extractor& extractor) {
    return {{"embed_dim", extractor.embed_dim()},
            {"input_dim", extractor.input_dim()},
            {"margin", extractor.margin},
            {"generation", extractor.generation},
            {"distance", to_string(extractor.distance)},
            {"weights", std::vector<double>(extractor.weights.data(),
                                            extractor.weights.data() + extractor.weights.size())}};
}

Extractor extractor_from_json(const nlohmann::json& j) {
    Extractor e;
    const auto rows = j.at("embed_dim").get<Eigen::Index>();
    const auto cols = j.at("input_dim").get<Eigen::Index>();
    const auto w = j.at("weights").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols) throw ShapeError(kPhase, "extractor weight count mismatch");
    e.weights = Eigen::Map<const Matrix>(w.data(), rows, cols);
    e.margin = j.at("margin").get<double>();
    e.generation = j.at("generation").get<std::size_t>();
    e.distance = distance_kind_from_string(j.value("distance", std::string{"mse"}));
    return e;
}

nlohmann::json embedding_table(std::span<const DomainEmbedding> embeddings) {
    nlohmann::json table = nlohmann::json::object();
    for (const auto& e : embeddings) table[e.group_id] = {{"vector", e.vector}, {"sample_count", e.sample_count}};
    return table;
}

} // namespace synevo::personality
