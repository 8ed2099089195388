#pragma once

// Random instances and small synthetic setups shared by the unit tests and
// the acceptance binary.

#include <cstdint>
#include <random>
#include <vector>

#include "oracle.hpp"
#include "synevo/backbone.hpp"
#include "synevo/config.hpp"
#include "synevo/datagen.hpp"
#include "synevo/personality.hpp"

namespace fixtures {

struct BackboneInstance {
    synevo::ModelParams params;
    synevo::WindowBatch batch;
    synevo::GraphSpec graph;
    oracle::Shape shape{};
    oracle::Grid ahat;
    std::vector<oracle::Window> windows;
};

inline BackboneInstance random_backbone(std::uint64_t seed, std::size_t nodes = 4, std::size_t t_in = 3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    BackboneInstance in;
    in.shape = {nodes, t_in, 2, 5, 4};
    std::vector<std::vector<double>> adj(nodes, std::vector<double>(nodes, 0.0));
    for (std::size_t i = 0; i < nodes; ++i)
        for (std::size_t j = i + 1; j < nodes; ++j)
            if (unit(rng) < 0.6) adj[i][j] = adj[j][i] = 0.5 + unit(rng);
    synevo::Matrix a(nodes, nodes);
    for (std::size_t i = 0; i < nodes; ++i)
        for (std::size_t j = 0; j < nodes; ++j) a(i, j) = adj[i][j];
    in.graph = synevo::GraphSpec::from_adjacency(a);
    in.ahat = oracle::normalized_adjacency(adj);

    synevo::ArchConfig arch;
    arch.nodes = nodes;
    arch.t_in = t_in;
    arch.t_out = in.shape.t_out;
    arch.hidden1 = in.shape.h1;
    arch.hidden2 = in.shape.h2;
    in.params = synevo::ModelParams::random(arch, seed ^ 0x5eedULL);
    for (auto& v : in.params.values) v += 0.1 * normal(rng);

    in.batch = synevo::WindowBatch(t_in, arch.t_out, nodes);
    for (std::size_t s = 0; s < 3; ++s) {
        oracle::Window w;
        w.inputs.assign(t_in, std::vector<long double>(nodes));
        w.targets.assign(arch.t_out, std::vector<long double>(nodes));
        w.mask.assign(arch.t_out, std::vector<long double>(nodes));
        std::vector<double> x, y, m;
        for (std::size_t t = 0; t < t_in; ++t)
            for (std::size_t n = 0; n < nodes; ++n) {
                x.push_back(normal(rng));
                w.inputs[t][n] = x.back();
            }
        for (std::size_t t = 0; t < arch.t_out; ++t)
            for (std::size_t n = 0; n < nodes; ++n) {
                y.push_back(normal(rng));
                m.push_back(unit(rng) < 0.8 || (t == 0 && n == 0) ? 1.0 : 0.0);
                w.targets[t][n] = y.back();
                w.mask[t][n] = m.back();
            }
        in.batch.append(x, y, m);
        in.windows.push_back(std::move(w));
    }
    return in;
}

inline std::vector<long double> widen(const std::vector<double>& v) { return {v.begin(), v.end()}; }

/// Largest mismatch between backward() and central differences of the
/// reference loss.
inline double backbone_gradient_mismatch(const BackboneInstance& in) {
    const auto analytic = synevo::backward(in.params, in.batch, in.graph).gradient;
    auto loss = [&](const std::vector<long double>& theta) {
        return oracle::masked_mae(theta, in.shape, in.ahat, in.windows);
    };
    const auto theta = widen(in.params.values);
    double worst = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i)
        worst = std::max(worst, oracle::mismatch(analytic[i], oracle::central_difference(loss, theta, i, 1e-5L)));
    return worst;
}

struct ExtractorInstance {
    synevo::personality::Extractor extractor;
    std::vector<oracle::Pair> pairs;
};

inline ExtractorInstance random_extractor(std::uint64_t seed, std::size_t rows = 3, std::size_t cols = 4) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    ExtractorInstance in;
    in.extractor = synevo::personality::Extractor::init(rows, cols, seed, 1.0);
    for (std::size_t p = 0; p < 12; ++p) {
        oracle::Pair pair;
        for (std::size_t c = 0; c < cols; ++c) {
            pair.a.push_back(normal(rng));
            pair.b.push_back(normal(rng));
        }
        pair.same = p % 2 == 0;
        in.pairs.push_back(std::move(pair));
    }
    return in;
}

inline double extractor_gradient_mismatch(const ExtractorInstance& in) {
    std::vector<synevo::personality::SamplePair> pairs;
    for (const auto& p : in.pairs) pairs.push_back({p.a, p.b, p.same});
    const auto grad = synevo::personality::contrastive_gradient(in.extractor, pairs);
    const auto rows = static_cast<std::size_t>(in.extractor.weights.rows());
    const auto cols = static_cast<std::size_t>(in.extractor.weights.cols());
    std::vector<long double> w(in.extractor.weights.data(), in.extractor.weights.data() + rows * cols);
    auto objective = [&](const std::vector<long double>& x) {
        return oracle::contrastive(x, rows, cols, in.extractor.margin, in.pairs);
    };
    double worst = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        worst = std::max(worst, oracle::mismatch(grad.data()[i], oracle::central_difference(objective, w, i, 1e-5L)));
    return worst;
}

/// Small synthetic experiment: 6 nodes, 4 periods per day of 24 steps.
inline synevo::ExperimentConfig tiny_config(std::uint64_t seed = 1, std::size_t domains = 3) {
    synevo::ExperimentConfig c;
    c.seed = seed;
    c.dataset.synthetic.node_count = 6;
    c.dataset.synthetic.timesteps = 960;
    c.dataset.synthetic.domain_count = domains;
    c.dataset.synthetic.steps_per_day = 48;
    c.layout.t_in = 6;
    c.layout.t_out = 3;
    c.layout.steps_per_day = 48;
    c.layout.periods_per_day = 4;
    c.hidden1 = 16;
    c.hidden2 = 16;
    c.evolve.training.epochs = 5;
    c.evolve.isolated_epochs = 5;
    c.evolve.extractor_epochs = 10;
    c.evolve.adapt_epochs = 5;
    c.evolve.probe.convergence.max_epochs = 10;
    c.output_dir = "";
    return c;
}

} // namespace fixtures
