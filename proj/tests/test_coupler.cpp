#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "synevo/coupler.hpp"
#include "synevo/error.hpp"
#include "synevo/experiments.hpp"

using namespace synevo;
using namespace synevo::coupler;

namespace {

personality::DomainEmbedding emb(std::string id, std::vector<double> v) { return {std::move(id), std::move(v), 1}; }

struct Run {
    experiments::Dataset data;
    EvolveConfig evolve;
};

Run prepare(std::uint64_t seed, std::size_t domains) {
    auto cfg = fixtures::tiny_config(seed, domains);
    Run r{experiments::load_dataset(cfg), {}};
    r.evolve = evolve_config_for(cfg, r.data.graph.node_count);
    return r;
}

} // namespace

TEST_CASE("build_registry") {
    const std::vector<double> x{1.0, 1.0};
    const std::vector<personality::DomainEmbedding> same{emb("a", {1.0, 1.0})};
    const auto r0 = build_registry(x, same, 0.5);
    CHECK(r0.entries.size() == 1);
    CHECK(r0.d_min == 0.0);

    // MSE over one element is the squared gap.
    const std::vector<double> origin{0.0};
    std::vector<personality::DomainEmbedding> stored{emb("a", {std::sqrt(2.0)}), emb("b", {std::sqrt(0.5)}),
                                                     emb("c", {std::sqrt(7.1)})};
    CHECK(build_registry(origin, stored, 1.0).d_min == doctest::Approx(0.5));
    std::reverse(stored.begin(), stored.end());
    CHECK(build_registry(origin, stored, 1.0).d_min == doctest::Approx(0.5));

    CHECK_THROWS_AS(build_registry(origin, std::vector<personality::DomainEmbedding>{}, 1.0), Error);
    CHECK_THROWS_AS(build_registry(x, stored, 1.0), ShapeError);
}

TEST_CASE("gate truth table and monotonicity") {
    const double k = 0.8;
    CHECK(gate(0.0, k).h == 0);
    CHECK(gate(k / 2, k).h == 1);
    CHECK(gate(k, k).h == 0);
    CHECK(gate(2 * k, k).h == 0);
    CHECK(gate(k / 2, k).branch == Branch::absorb);
    CHECK(gate(k, k).branch == Branch::isolate);
    CHECK(gate(1e12, INFINITY).h == 1);
    for (double d : {1e-6, 0.1, 1.0, 3.0})
        for (double k1 : {0.01, 0.5, 2.0})
            for (double k2 : {0.01, 0.5, 2.0, 10.0})
                if (k1 <= k2) CHECK(gate(d, k1).h <= gate(d, k2).h);
    CHECK_THROWS_AS(gate(-1.0, 1.0), Error);
    CHECK_THROWS_AS(gate(1.0, 0.0), Error);
}

TEST_CASE("assemble_loss") {
    CHECK(assemble_loss(gate(0.5, 1.0), 2.0, 0.05, 10.0, 99.0) == doctest::Approx(2.5));
    CHECK(assemble_loss(gate(2.0, 1.0), 2.0, 0.05, 10.0, 7.25) == 7.25);
    CHECK(assemble_loss(gate(0.5, 1.0), 2.0, 0.0, 10.0, 7.25) == 2.0);
    CHECK_THROWS_AS(assemble_loss(gate(0.5, 1.0), -1.0, 0.0, 0.0, 0.0), Error);
}

TEST_CASE("schedule_for per mode") {
    EvolveConfig c;
    std::vector<std::string> flags;
    const auto el = schedule_for(c, "g", 1.0, 2.0, flags);
    CHECK(el.p == elastic::schedule(1.0, 2.0, c.p0, c.lambda0).p);

    c.schedule = ScheduleMode::fixed;
    const auto fx = schedule_for(c, "g", 1.0, 2.0, flags);
    CHECK(fx.p == 0.1);
    CHECK(fx.lambda == 0.001);

    c.schedule = ScheduleMode::inverse_length;
    const auto der = schedule_for(c, "g", 4.0, 5.0, flags);
    CHECK(der.p == doctest::Approx(c.p0 / 4.0));
    CHECK(flags.empty());
    const auto guard = schedule_for(c, "g", 0.5, 5.0, flags);
    CHECK(guard.p == c.p0);
    CHECK(flags == std::vector<std::string>{"der_guard"});

    c.schedule = ScheduleMode::elastic;
    flags.clear();
    const auto over = schedule_for(c, "g", 3.0, 2.0, flags);
    CHECK(over.p == 0.0);
    CHECK(flags == std::vector<std::string>{"clamped"});
}

TEST_CASE("stream_order") {
    const auto r = curriculum::order_profiles({curriculum::make_profile("a", {{0.0}}),
                                               curriculum::make_profile("b", {{1.0}}),
                                               curriculum::make_profile("c", {{2.0}}),
                                               curriculum::make_profile("d", {{3.0}})});
    CHECK(stream_order(r, OrderMode::curriculum, 1) == std::vector<std::string>{"a", "b", "c", "d"});
    CHECK(stream_order(r, OrderMode::reverse, 1) == std::vector<std::string>{"d", "c", "b", "a"});
    auto shuffled = stream_order(r, OrderMode::random, 5);
    CHECK(shuffled == stream_order(r, OrderMode::random, 5));
    std::sort(shuffled.begin(), shuffled.end());
    CHECK(shuffled == std::vector<std::string>{"a", "b", "c", "d"});
}

TEST_CASE("evolve with one group bootstraps without gating") {
    auto r = prepare(1, 1);
    const auto res = evolve(r.data.groups, r.data.graph, r.evolve);
    REQUIRE(res.log.records.size() == 1);
    CHECK(res.log.records[0].bootstrap);
    CHECK_FALSE(res.log.records[0].registry.has_value());
    CHECK(res.state.container.absorbed_ids() == std::vector<std::string>{"d00"});
}

TEST_CASE("unbounded kappa absorbs every group") {
    auto r = prepare(2, 4);
    r.evolve.kappa = 1e300;
    const auto res = evolve(r.data.groups, r.data.graph, r.evolve);
    CHECK(res.state.container.absorbed_ids().size() == 4);
    std::size_t gated = 0;
    for (const auto& rec : res.log.records) gated += rec.registry ? 1 : 0;
    CHECK(gated == 3);
    CHECK(res.state.container.absorbed_ids() == res.order);
}

TEST_CASE("a rejected group leaves the container bitwise unchanged") {
    auto r = prepare(3, 3);
    r.evolve.kappa = 1e-300;
    const auto res = evolve(std::span(r.data.groups).first(1), r.data.graph, r.evolve);
    auto state = res.state;
    const auto before = state.container.params.values;
    const auto steps = state.container.optimizer.step_count;
    const auto generation = state.extractor.generation;
    const auto rec = incorporate(state, r.data.groups[1], r.data.graph, r.evolve, 0.5);
    CHECK(rec.decision.h == 0);
    CHECK(state.container.params.values == before);
    CHECK(state.container.optimizer.step_count == steps);
    CHECK(state.isolated.count(r.data.groups[1].group_id) == 1);
    CHECK(state.extractor.generation == generation + 1);
    CHECK(&state.model_for(r.data.groups[1].group_id) == &state.isolated.at(r.data.groups[1].group_id));
}

TEST_CASE("a zero distance is flagged and not absorbed") {
    auto r = prepare(4, 1);
    const auto res = evolve(r.data.groups, r.data.graph, r.evolve);
    auto state = res.state;
    auto twin = r.data.groups[0];
    twin.group_id = "twin";
    const auto rec = incorporate(state, twin, r.data.graph, r.evolve, 0.0);
    CHECK(rec.registry->d_min == 0.0);
    CHECK(rec.decision.h == 0);
    CHECK(std::find(rec.flags.begin(), rec.flags.end(), "zero_distance") != rec.flags.end());
}

TEST_CASE("always_absorb forces the gate open") {
    auto r = prepare(5, 3);
    r.evolve.kappa = 1e-300;
    r.evolve.gate = GateMode::always_absorb;
    const auto res = evolve(r.data.groups, r.data.graph, r.evolve);
    CHECK(res.state.container.absorbed_ids().size() == 3);
    for (const auto& rec : res.log.records)
        if (!rec.bootstrap) CHECK(rec.forced);
}

TEST_CASE("evolution replays deterministically and cycles repeat the stream") {
    auto r = prepare(6, 3);
    r.evolve.cycles = 2;
    const auto a = evolve(r.data.groups, r.data.graph, r.evolve);
    const auto b = evolve(r.data.groups, r.data.graph, r.evolve);
    CHECK(a.log.to_jsonl() == b.log.to_jsonl());
    REQUIRE(a.log.records.size() == 6);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a.log.records[i + 3].group_id == a.log.records[i].group_id);
        CHECK(a.log.records[i + 3].replayed);
        CHECK(a.log.records[i + 3].decision.h == a.log.records[i].decision.h);
    }
    const auto line = nlohmann::json::parse(a.log.to_jsonl().substr(0, a.log.to_jsonl().find('\n')));
    for (const char* key : {"group_id", "d_min", "kappa", "h", "p", "lambda", "final_loss", "eval_metrics"})
        CHECK(line.contains(key));
}
