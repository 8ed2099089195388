#include "synevo/coupler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "synevo/error.hpp"
#include "synevo/seed.hpp"

namespace synevo::coupler {

namespace {

constexpr const char* kPhase = "coupler";

double dataset_loss(const ModelParams& params, const WindowBatch& batch, const GraphSpec& graph) {
    const auto pred = forward(params, batch, graph);
    return masked_mae_loss(pred, batch.targets, batch.mask);
}

double squared_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

std::optional<MetricsReport> maybe_evaluate(const ModelParams& params, const WindowBatch& batch, const GraphSpec& graph) {
    if (batch.empty()) return std::nullopt;
    return evaluate(params, batch, graph);
}

void refresh_embeddings(CouplerState& state) {
    state.embeddings.clear();
    for (const auto& g : state.absorbed_windows) state.embeddings.push_back(personality::embed(state.extractor, g));
}

void remember_absorbed(CouplerState& state, const DomainGroup& group) {
    const bool known = std::any_of(state.absorbed_windows.begin(), state.absorbed_windows.end(),
                                   [&](const DomainGroup& g) { return g.group_id == group.group_id; });
    if (known) return;
    state.absorbed_windows.push_back(personality_view(group));
    state.embeddings.push_back(personality::embed(state.extractor, state.absorbed_windows.back()));
}

// Trains (or keeps training) the group's own model with no dropout or decay.
std::vector<double> train_isolated(CouplerState& state, const DomainGroup& group, const GraphSpec& graph,
                                   const EvolveConfig& config, std::size_t cycle) {
    const auto seed = derive_seed(config.seed, name_hash(group.group_id));
    auto model = elastic::CommonContainerState::init(config.probe.arch, seed, config.learning_rate);
    if (auto it = state.isolated.find(group.group_id); it != state.isolated.end()) model.params = it->second;
    elastic::ElasticSchedule none;
    none.group_id = group.group_id;
    auto training = config.training;
    training.epochs = config.isolated_epochs;
    training.cycle = cycle;
    auto trace = elastic::train_on_group(model, group, graph, none, training);
    state.isolated[group.group_id] = std::move(model.params);
    return trace;
}

void finish_record(EvolutionRecord& record, const CouplerState& state, const DomainGroup& group,
                   const GraphSpec& graph) {
    const auto& model = state.model_for(group.group_id);
    record.post = maybe_evaluate(model, group.test, graph);
    record.final_loss = record.trace.empty() ? dataset_loss(model, group.train, graph) : record.trace.back();
    const double train_loss = dataset_loss(model, group.train, graph);
    record.objective = assemble_loss(record.decision, train_loss, record.schedule.lambda,
                                     squared_norm(state.container.params.values), train_loss);
    record.extractor_generation = state.extractor.generation;
}

} // namespace

DomainGroup personality_view(const DomainGroup& group) {
    DomainGroup out;
    out.group_id = group.group_id;
    out.source = group.source;
    out.train = personality::standardized(group.train);
    return out;
}

DistanceRegistry build_registry(std::span<const double> new_embedding,
                                std::span<const personality::DomainEmbedding> stored, double kappa,
                                personality::DistanceKind kind) {
    if (stored.empty()) throw Error(kPhase, "build_registry: no stored embeddings");
    DistanceRegistry r;
    r.kappa = kappa;
    r.d_min = std::numeric_limits<double>::infinity();
    for (const auto& e : stored) {
        const double d = personality::distance(new_embedding, e.vector, kind);
        r.entries.push_back({e.group_id, d});
        r.d_min = std::min(r.d_min, d);
    }
    return r;
}

GateDecision gate(double d_min, double kappa) {
    if (!(d_min >= 0.0)) throw Error(kPhase, "gate: d_min must be nonnegative");
    if (!(kappa > 0.0)) throw Error(kPhase, "gate: kappa must be positive");
    GateDecision g;
    g.d_min = d_min;
    g.kappa = kappa;
    g.h = (d_min > 0.0 && d_min < kappa) ? 1 : 0;
    g.branch = g.h ? Branch::absorb : Branch::isolate;
    return g;
}

double assemble_loss(const GateDecision& decision, double container_loss, double lambda, double theta_norm_sq,
                     double isolated_loss) {
    if (!(container_loss >= 0.0) || !(isolated_loss >= 0.0)) throw Error(kPhase, "assemble_loss: losses must be nonnegative");
    if (decision.h == 1) return container_loss + lambda * theta_norm_sq;
    return isolated_loss;
}

const ModelParams& CouplerState::model_for(const std::string& group_id) const {
    if (container.has_absorbed(group_id)) return container.params;
    if (auto it = isolated.find(group_id); it != isolated.end()) return it->second;
    return container.params;
}

std::vector<std::string> stream_order(const curriculum::Reordering& reordering, OrderMode mode, std::uint64_t seed) {
    auto order = reordering.sequence.order;
    switch (mode) {
        case OrderMode::curriculum: break;
        case OrderMode::reverse: std::reverse(order.begin(), order.end()); break;
        case OrderMode::random: {
            order.clear();
            for (const auto& p : reordering.profiles) order.push_back(p.group_id);
            std::mt19937_64 rng(derive_seed(seed, 77));
            std::shuffle(order.begin(), order.end(), rng);
            break;
        }
    }
    return order;
}

elastic::ElasticSchedule schedule_for(const EvolveConfig& config, const std::string& group_id, double length,
                                      double d_max, std::vector<std::string>& flags) {
    elastic::ElasticSchedule s;
    switch (config.schedule) {
        case ScheduleMode::elastic:
            s = elastic::schedule_clamped(length, d_max, config.p0, config.lambda0);
            break;
        case ScheduleMode::fixed:
            s.length = length;
            s.d_max = d_max;
            s.p = config.fixed_p;
            s.lambda = config.fixed_lambda;
            break;
        case ScheduleMode::inverse_length:
            s = elastic::schedule_clamped(length, d_max, config.p0, config.lambda0);
            if (length > 1.0) {
                s.p = config.p0 / length;
            } else {
                s.p = config.p0;
                flags.push_back("der_guard");
            }
            break;
    }
    if (s.clamped) flags.push_back("clamped");
    s.group_id = group_id;
    return s;
}

EvolutionRecord incorporate(CouplerState& state, const DomainGroup& group, const GraphSpec& graph,
                            const EvolveConfig& config, std::optional<double> length, std::size_t cycle) {
    EvolutionRecord record;
    record.group_id = group.group_id;
    record.cycle = cycle;

    std::vector<personality::DomainEmbedding> others;
    for (const auto& e : state.embeddings)
        if (e.group_id != group.group_id) others.push_back(e);
    const auto view = personality_view(group);
    const auto embedding = personality::embed(state.extractor, view);
    record.registry = build_registry(embedding.vector, others, config.kappa, config.distance);
    record.decision = gate(record.registry->d_min, config.kappa);
    if (record.registry->d_min == 0.0) record.flags.push_back("zero_distance");
    if (config.gate == GateMode::always_absorb) {
        record.forced = true;
        record.decision.h = 1;
        record.decision.branch = Branch::absorb;
    }
    record.pre = maybe_evaluate(state.container.params, group.test, graph);

    if (record.decision.h == 1) {
        if (!length) {
            const auto profile = curriculum::profile_group(group, graph, config.probe);
            length = curriculum::difficulty(profile, state.bench).length;
        }
        record.schedule = schedule_for(config, group.group_id, *length, state.d_max, record.flags);
        auto training = config.training;
        training.cycle = cycle;
        record.trace = elastic::train_on_group(state.container, group, graph, record.schedule, training);
        remember_absorbed(state, group);
    } else {
        record.schedule.group_id = group.group_id;
        record.schedule.length = length.value_or(std::numeric_limits<double>::quiet_NaN());
        record.schedule.d_max = state.d_max;
        record.trace = train_isolated(state, group, graph, config, cycle);

        state.extractor = personality::reinstantiate(state.extractor);
        std::vector<const DomainGroup*> adapt;
        for (const auto& g : state.absorbed_windows) adapt.push_back(&g);
        adapt.push_back(&view);
        auto sampling = config.pairs;
        sampling.seed = derive_seed(config.seed, 1000 + state.extractor.generation);
        personality::train_extractor(state.extractor, adapt, sampling, config.adapt_epochs);
        refresh_embeddings(state);
        state.isolated_generation[group.group_id] = state.extractor.generation;
    }
    finish_record(record, state, group, graph);
    return record;
}

EvolutionResult evolve(std::span<const DomainGroup> groups, const GraphSpec& graph, const EvolveConfig& config,
                       const EvalHook& hook) {
    if (groups.empty()) throw Error(kPhase, "evolve: no groups");
    const auto reordering = curriculum::reorder(groups, graph, config.probe);
    return evolve(groups, graph, config, reordering, hook);
}

EvolutionResult evolve(std::span<const DomainGroup> groups, const GraphSpec& graph, const EvolveConfig& config,
                       const curriculum::Reordering& reordering, const EvalHook& hook) {
    if (groups.empty()) throw Error(kPhase, "evolve: no groups");
    if (config.cycles == 0) throw Error(kPhase, "evolve: cycles must be at least 1");
    auto find_group = [&](const std::string& id) -> const DomainGroup& {
        for (const auto& g : groups)
            if (g.group_id == id) return g;
        throw Error(kPhase, "evolve: unknown group " + id);
    };
    auto length_of = [&](const std::string& id) {
        for (const auto& s : reordering.scores)
            if (s.group_id == id) return s.length;
        throw Error(kPhase, "evolve: no difficulty for group " + id);
    };

    EvolutionResult result;
    result.reordering = reordering;
    result.order = stream_order(reordering, config.order, config.seed);
    auto& state = result.state;
    for (const auto& p : reordering.profiles)
        if (p.group_id == reordering.bench_id) state.bench = p;
    state.d_max = reordering.d_max;
    state.container = elastic::CommonContainerState::init(config.probe.arch, derive_seed(config.seed, 1), config.learning_rate);

    const std::size_t input_dim = groups.front().train.input_stride();
    state.extractor = personality::Extractor::init(config.embed_dim, input_dim, derive_seed(config.seed, 2), config.margin,
                                                   config.distance);
    std::vector<DomainGroup> views;
    for (const auto& g : groups) views.push_back(personality_view(g));
    std::vector<const DomainGroup*> all;
    for (const auto& v : views) all.push_back(&v);
    auto sampling = config.pairs;
    sampling.seed = derive_seed(config.seed, 3);
    if (groups.size() > 1) personality::train_extractor(state.extractor, all, sampling, config.extractor_epochs);

    std::map<std::string, EvolutionRecord> first_cycle;
    try {
        for (std::size_t cycle = 0; cycle < config.cycles; ++cycle) {
            for (std::size_t pos = 0; pos < result.order.size(); ++pos) {
                const auto& group = find_group(result.order[pos]);
                EvolutionRecord record;
                if (cycle == 0 && pos == 0) {
                    record.group_id = group.group_id;
                    record.bootstrap = true;
                    record.decision.h = 1;
                    record.decision.branch = Branch::absorb;
                    record.decision.kappa = config.kappa;
                    record.pre = maybe_evaluate(state.container.params, group.test, graph);
                    record.schedule = schedule_for(config, group.group_id, length_of(group.group_id), state.d_max,
                                                   record.flags);
                    record.trace = elastic::train_on_group(state.container, group, graph, record.schedule, config.training);
                    remember_absorbed(state, group);
                    finish_record(record, state, group, graph);
                } else if (cycle == 0) {
                    record = incorporate(state, group, graph, config, length_of(group.group_id), cycle);
                } else {
                    const auto& first = first_cycle.at(group.group_id);
                    record.group_id = group.group_id;
                    record.cycle = cycle;
                    record.replayed = true;
                    record.bootstrap = first.bootstrap;
                    record.forced = first.forced;
                    record.decision = first.decision;
                    record.registry = first.registry;
                    record.schedule = first.schedule;
                    record.flags = first.flags;
                    record.pre = maybe_evaluate(state.model_for(group.group_id), group.test, graph);
                    if (state.absorbed(group.group_id)) {
                        auto training = config.training;
                        training.cycle = cycle;
                        record.trace = elastic::train_on_group(state.container, group, graph, record.schedule, training);
                    } else {
                        record.trace = train_isolated(state, group, graph, config, cycle);
                    }
                    finish_record(record, state, group, graph);
                }
                record.position = pos;
                if (hook) record.eval = hook(state.container.params);
                if (cycle == 0) first_cycle[group.group_id] = record;
                result.log.records.push_back(std::move(record));
            }
        }
    } catch (const Error& e) {
        throw Error(kPhase, std::string("evolution stopped after ") + std::to_string(result.log.records.size()) +
                                " records: " + e.what());
    }
    return result;
}

nlohmann::json to_json(const EvolutionRecord& r) {
    auto metrics_json = [](const std::optional<MetricsReport>& m) { return m ? to_json(*m) : nlohmann::json(nullptr); };
    auto number = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    nlohmann::json j{{"group_id", r.group_id},
                     {"cycle", r.cycle},
                     {"position", r.position},
                     {"d_min", r.registry ? number(r.registry->d_min) : nlohmann::json(nullptr)},
                     {"kappa", r.decision.kappa},
                     {"h", r.decision.h},
                     {"branch", r.decision.branch == Branch::absorb ? "absorb" : "isolate"},
                     {"p", r.schedule.p},
                     {"lambda", r.schedule.lambda},
                     {"length", number(r.schedule.length)},
                     {"final_loss", r.final_loss},
                     {"objective", r.objective},
                     {"eval_metrics", {{"pre", metrics_json(r.pre)}, {"post", metrics_json(r.post)},
                                       {"holdout", metrics_json(r.eval)}}},
                     {"bootstrap", r.bootstrap},
                     {"replayed", r.replayed},
                     {"forced", r.forced},
                     {"extractor_generation", r.extractor_generation},
                     {"flags", r.flags}};
    if (r.registry) {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& e : r.registry->entries) entries.push_back({{"group_id", e.group_id}, {"distance", e.distance}});
        j["registry"] = entries;
    }
    return j;
}

std::string EvolutionLog::to_jsonl() const {
    std::ostringstream out;
    for (const auto& r : records) out << to_json(r).dump() << '\n';
    return out.str();
}

} // namespace synevo::coupler
