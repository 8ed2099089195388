#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "synevo/backbone.hpp"
#include "synevo/error.hpp"
#include "synevo/serialize.hpp"

using namespace synevo;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.begin()->size());
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

ArchConfig one_node_arch() {
    ArchConfig a;
    a.nodes = 1;
    a.t_in = 1;
    a.t_out = 1;
    a.hidden1 = 1;
    a.hidden2 = 1;
    return a;
}

} // namespace

TEST_CASE("normalize_adjacency examples") {
    CHECK(normalize_adjacency(mat({{0}}))(0, 0) == doctest::Approx(1.0));
    const Matrix id = normalize_adjacency(mat({{1, 0}, {0, 1}}));
    CHECK(id(0, 0) == doctest::Approx(1.0));
    CHECK(id(0, 1) == 0.0);
    CHECK(id(1, 1) == doctest::Approx(1.0));
    const Matrix pair = normalize_adjacency(mat({{0, 1}, {1, 0}}));
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) CHECK(pair(i, j) == doctest::Approx(0.5));
    CHECK_THROWS_AS(normalize_adjacency(mat({{0, 1}, {0, 0}})), ShapeError);
    CHECK_THROWS_AS(normalize_adjacency(Matrix(2, 3)), ShapeError);
}

TEST_CASE("normalize_adjacency agrees with the reference on random graphs") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto in = fixtures::random_backbone(seed, 5);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 5; ++j)
                CHECK(in.graph.normalized(i, j) == doctest::Approx(static_cast<double>(in.ahat[i][j])).epsilon(1e-14));
    }
}

TEST_CASE("flatten and unflatten round trip") {
    for (std::size_t h : {1, 3, 8}) {
        ArchConfig a;
        a.nodes = 3;
        a.t_in = 4;
        a.t_out = 2;
        a.hidden1 = h;
        a.hidden2 = h + 1;
        const auto p = ModelParams::random(a, h);
        CHECK(p.values.size() == a.param_count());
        CHECK(ModelParams::flatten(a, p.unflatten()).values == p.values);
    }
}

TEST_CASE("forward matches the reference and respects activeness") {
    const auto in = fixtures::random_backbone(7);
    const auto pred = forward(in.params, in.batch, in.graph);
    const auto theta = fixtures::widen(in.params.values);
    for (std::size_t s = 0; s < in.windows.size(); ++s) {
        const auto ref = oracle::predict(theta, in.shape, in.ahat, in.windows[s]);
        for (std::size_t t = 0; t < in.shape.t_out; ++t)
            for (std::size_t n = 0; n < in.shape.nodes; ++n)
                CHECK(pred[(s * in.shape.t_out + t) * in.shape.nodes + n] ==
                      doctest::Approx(static_cast<double>(ref[t][n])).epsilon(1e-12));
    }

    const std::vector<double> ones(in.params.values.size(), 1.0);
    CHECK(forward(in.params, in.batch, in.graph, ones) == pred);

    std::mt19937_64 rng(3);
    std::bernoulli_distribution keep(0.6);
    std::vector<double> mask(in.params.values.size());
    for (auto& m : mask) m = keep(rng) ? 1.0 : 0.0;
    auto masked = in.params;
    for (std::size_t i = 0; i < mask.size(); ++i) masked.values[i] *= mask[i];
    CHECK(forward(in.params, in.batch, in.graph, mask) == forward(masked, in.batch, in.graph));

    const auto zero = ModelParams::zeros(in.params.arch);
    for (double v : forward(zero, in.batch, in.graph)) CHECK(v == 0.0);
}

TEST_CASE("forward on a one-node graph by hand") {
    // Â = [1]; W1 = 2, b1 = −1, W2 = 1, b2 = 0.5, W3 = 3, b3 = 1.
    auto p = ModelParams::zeros(one_node_arch());
    p.values = {2, -1, 1, 0.5, 3, 1};
    WindowBatch b(1, 1, 1);
    b.append(std::vector<double>{2.0}, std::vector<double>{0.0}, std::vector<double>{1.0});
    b.append(std::vector<double>{0.25}, std::vector<double>{0.0}, std::vector<double>{1.0});
    const auto g = GraphSpec::from_adjacency(mat({{0}}));
    const auto y = forward(p, b, g);
    // x=2: relu(3)=3, relu(3.5)=3.5, 11.5.  x=0.25: relu(-0.5)=0, relu(0.5)=0.5, 2.5.
    CHECK(y[0] == doctest::Approx(11.5));
    CHECK(y[1] == doctest::Approx(2.5));
}

TEST_CASE("shape errors name the layer") {
    const auto in = fixtures::random_backbone(2);
    WindowBatch wrong(in.shape.t_in + 1, in.shape.t_out, in.shape.nodes);
    wrong.append(std::vector<double>(wrong.input_stride(), 0.0), std::vector<double>(wrong.target_stride(), 0.0),
                 std::vector<double>(wrong.target_stride(), 1.0));
    try {
        forward(in.params, wrong, in.graph);
        FAIL("expected a shape error");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("W1") != std::string::npos);
    }
}

TEST_CASE("masked_mae_loss examples and invariants") {
    const std::vector<double> p{2, 4}, t{1, 1};
    CHECK(masked_mae_loss(p, t, std::vector<double>{1, 0}) == doctest::Approx(1.0));
    CHECK(masked_mae_loss(p, t, std::vector<double>{1, 1}) == doctest::Approx(2.0));
    CHECK(masked_mae_loss(p, p, std::vector<double>{1, 1}) == 0.0);
    CHECK_THROWS_AS(masked_mae_loss(p, t, std::vector<double>{0, 0}), Error);

    std::vector<double> ps{2 + 5.0, 4 + 5.0}, ts{1 + 5.0, 1 + 5.0};
    CHECK(masked_mae_loss(ps, ts, std::vector<double>{1, 1}) == doctest::Approx(2.0));
    CHECK(masked_mae_loss(std::vector<double>{4, 2}, std::vector<double>{1, 1}, std::vector<double>{1, 1}) ==
          doctest::Approx(2.0));
}

TEST_CASE("backward matches finite differences of the reference loss") {
    for (std::uint64_t seed = 100; seed < 125; ++seed) {
        const auto in = fixtures::random_backbone(seed, 2 + seed % 4, 2 + seed % 3);
        CHECK(fixtures::backbone_gradient_mismatch(in) < 1e-5);
    }
}

TEST_CASE("backward loss equals masked_mae_loss of forward") {
    const auto in = fixtures::random_backbone(11);
    const auto lg = backward(in.params, in.batch, in.graph);
    CHECK(lg.loss == doctest::Approx(masked_mae_loss(forward(in.params, in.batch, in.graph), in.batch.targets,
                                                     in.batch.mask)));
}

TEST_CASE("backward is zero at an exact fit and on masked layers") {
    auto in = fixtures::random_backbone(5);
    in.batch.targets = forward(in.params, in.batch, in.graph);
    for (double g : backward(in.params, in.batch, in.graph).gradient) CHECK(g == 0.0);

    const auto other = fixtures::random_backbone(6);
    std::vector<double> act(other.params.values.size(), 1.0);
    const auto layout = layer_layout(other.params.arch);
    const auto& w2 = layout[static_cast<std::size_t>(Layer::W2)];
    for (std::size_t i = w2.offset; i < w2.offset + w2.size(); ++i) act[i] = 0.0;
    const auto g = backward(other.params, other.batch, other.graph, act).gradient;
    for (std::size_t i = w2.offset; i < w2.offset + w2.size(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("adam_step") {
    std::vector<double> theta{1.0, -2.0, 0.5};
    auto st = OptimizerState::init(3, 0.01);
    adam_step(theta, std::vector<double>(3, 0.0), st);
    CHECK(theta == std::vector<double>{1.0, -2.0, 0.5});
    CHECK(st.step_count == 1);

    // First step from zero moments moves each entry by lr·sign(g).
    std::vector<double> g{0.3, -4.0, 1e-3};
    std::vector<double> x{0.0, 0.0, 0.0};
    auto s1 = OptimizerState::init(3, 0.01);
    adam_step(x, g, s1);
    CHECK(x[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(x[1] == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(x[2] == doctest::Approx(-0.01).epsilon(1e-4));

    std::vector<double> pos{1.0, 2.0};
    auto decay = OptimizerState::init(2, 0.01, 0.001);
    adam_step(pos, std::vector<double>(2, 0.0), decay);
    CHECK(pos[0] < 1.0);
    CHECK(pos[1] < 2.0);

    std::vector<double> frozen{1.0, 1.0};
    auto s2 = OptimizerState::init(2, 0.01);
    const std::vector<std::uint8_t> active{0, 1};
    adam_step(frozen, std::vector<double>{1.0, 1.0}, s2, active);
    CHECK(frozen[0] == 1.0);
    CHECK(frozen[1] < 1.0);
    CHECK(s2.first_moment[0] == 0.0);

    CHECK_THROWS(adam_step(frozen, std::vector<double>{1.0}, s2));
}

TEST_CASE("train_to_convergence") {
    // Constant targets are matched by the readout bias alone.
    ArchConfig a;
    a.nodes = 3;
    a.t_in = 2;
    a.t_out = 1;
    a.hidden1 = 4;
    a.hidden2 = 4;
    const auto g = GraphSpec::from_adjacency(Matrix::Zero(3, 3));
    WindowBatch data(2, 1, 3);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal;
    for (int s = 0; s < 40; ++s) {
        std::vector<double> x(6);
        for (auto& v : x) v = normal(rng);
        data.append(x, std::vector<double>(3, 1.5), std::vector<double>(3, 1.0));
    }
    ConvergenceConfig cc;
    cc.max_epochs = 400;
    cc.patience = 20;
    cc.rel_tol = 1e-6;
    const auto r = train_to_convergence(ModelParams::random(a, 3), data, g, 0.01, 0.0, cc);
    CHECK(r.final_loss < 1e-2);
    CHECK(r.gradient.size() == a.param_count());

    const auto again = train_to_convergence(ModelParams::random(a, 3), data, g, 0.01, 0.0, cc);
    CHECK(again.trace == r.trace);
    CHECK(again.params.values == r.params.values);

    ConvergenceConfig none = cc;
    none.max_epochs = 0;
    const auto init = ModelParams::random(a, 3);
    const auto z = train_to_convergence(init, data, g, 0.01, 0.0, none);
    CHECK(z.trace.empty());
    CHECK(z.params.values == init.values);
    CHECK(z.gradient == backward(init, data, g).gradient);
}

TEST_CASE("divergence is reported with the finite trace") {
    ArchConfig a = one_node_arch();
    const auto g = GraphSpec::from_adjacency(mat({{0}}));
    WindowBatch data(1, 1, 1);
    data.append(std::vector<double>{1e308}, std::vector<double>{-1e308}, std::vector<double>{1.0});
    auto p = ModelParams::random(a, 1);
    for (auto& v : p.values) v = 1e10;
    ConvergenceConfig cc;
    cc.max_epochs = 5;
    CHECK_THROWS_AS(train_to_convergence(p, data, g, 0.01, 0.0, cc), DivergenceError);
}

TEST_CASE("parameter serialization round trips exactly") {
    const auto in = fixtures::random_backbone(9);
    CHECK(params_from_json(params_to_json(in.params)).values == in.params.values);
    std::stringstream ss;
    write_params_binary(ss, in.params);
    const auto back = read_params_binary(ss);
    CHECK(back.values == in.params.values);
    CHECK(back.arch == in.params.arch);

    std::stringstream bad("NOTMAGIC");
    CHECK_THROWS(read_params_binary(bad));
}
