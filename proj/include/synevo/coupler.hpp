#pragma once

// Adaptive dynamic coupler and the evolution loop.
//
// New groups are embedded by the personality extractor and compared with the
// groups already held by the common container. A group whose nearest absorbed
// neighbour lies strictly inside (0, κ) is absorbed: the container trains on
// it under its elastic schedule. Anything else gets a fresh model of its own,
// and the extractor is warm-started and adapted to the newcomer.

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "synevo/curriculum.hpp"
#include "synevo/domain.hpp"
#include "synevo/elastic.hpp"
#include "synevo/metrics.hpp"
#include "synevo/personality.hpp"

namespace synevo::coupler {

struct RegistryEntry {
    std::string group_id;
    double distance = 0.0;
};

struct DistanceRegistry {
    std::vector<RegistryEntry> entries;
    double d_min = 0.0;
    double kappa = 0.0;
};

/// What the extractor sees of a group: its training windows, standardized so
/// that a domain's scale and offset are not mistaken for personality.
DomainGroup personality_view(const DomainGroup& group);

DistanceRegistry build_registry(std::span<const double> new_embedding,
                                std::span<const personality::DomainEmbedding> stored, double kappa,
                                personality::DistanceKind kind = personality::DistanceKind::mse);

enum class Branch { absorb, isolate };

struct GateDecision {
    int h = 0;
    double d_min = 0.0;
    double kappa = 0.0;
    Branch branch = Branch::isolate;
};

/// h = 1 iff 0 < d_min < κ.
GateDecision gate(double d_min, double kappa);

/// h·(container_loss + λ·‖θ‖²) + (1−h)·isolated_loss.
double assemble_loss(const GateDecision& decision, double container_loss, double lambda, double theta_norm_sq,
                     double isolated_loss);

enum class OrderMode { curriculum, random, reverse };
enum class ScheduleMode { elastic, fixed, inverse_length };
enum class GateMode { adaptive, always_absorb };

struct EvolveConfig {
    curriculum::ProbeConfig probe;
    double p0 = 0.3;
    double lambda0 = 0.05;
    double kappa = 0.1;
    double fixed_p = 0.1;
    double fixed_lambda = 0.001;
    double learning_rate = 0.01;
    elastic::GroupTraining training;
    std::size_t isolated_epochs = 30;
    std::size_t cycles = 1;

    std::size_t embed_dim = 16;
    double margin = 1.0;
    personality::DistanceKind distance = personality::DistanceKind::mse;
    personality::PairSampling pairs;
    std::size_t extractor_epochs = 30;
    std::size_t adapt_epochs = 30;

    OrderMode order = OrderMode::curriculum;
    ScheduleMode schedule = ScheduleMode::elastic;
    GateMode gate = GateMode::adaptive;
    std::uint64_t seed = 0;
};

struct EvolutionRecord {
    std::string group_id;
    std::size_t cycle = 0;
    std::size_t position = 0;
    bool bootstrap = false;
    bool replayed = false;  // later cycles reuse the first cycle's decision
    bool forced = false;    // gate bypassed (always_absorb)
    std::optional<DistanceRegistry> registry;
    GateDecision decision;
    elastic::ElasticSchedule schedule;
    double objective = 0.0;   // assembled objective at the end of training
    double final_loss = 0.0;  // last epoch mean training loss
    std::vector<double> trace;
    std::optional<MetricsReport> pre;   // on the group's test split before training
    std::optional<MetricsReport> post;  // after training
    std::optional<MetricsReport> eval;  // evaluation hook, container after this group
    std::size_t extractor_generation = 0;
    std::vector<std::string> flags;
};

struct EvolutionLog {
    std::vector<EvolutionRecord> records;

    std::string to_jsonl() const;
};

nlohmann::json to_json(const EvolutionRecord& record);

struct CouplerState {
    elastic::CommonContainerState container;
    personality::Extractor extractor;
    std::vector<personality::DomainEmbedding> embeddings;  // absorbed groups, current extractor
    std::vector<DomainGroup> absorbed_windows;             // standardized train windows of absorbed groups
    curriculum::GradientProfile bench;
    double d_max = 0.0;
    std::map<std::string, ModelParams> isolated;
    std::map<std::string, std::size_t> isolated_generation;

    /// The model a group is served by: the container when absorbed, its own
    /// isolated model otherwise.
    const ModelParams& model_for(const std::string& group_id) const;
    bool absorbed(const std::string& group_id) const { return container.has_absorbed(group_id); }
};

/// Called with the container after every processed group; the returned
/// report lands in EvolutionRecord::eval.
using EvalHook = std::function<MetricsReport(const ModelParams& container)>;

/// Embeds `group`, gates it against the absorbed groups and trains the chosen
/// branch. `length` is the group's curriculum difficulty when known;
/// otherwise the group is profiled against the frozen bench.
EvolutionRecord incorporate(CouplerState& state, const DomainGroup& group, const GraphSpec& graph,
                            const EvolveConfig& config, std::optional<double> length = std::nullopt,
                            std::size_t cycle = 0);

struct EvolutionResult {
    CouplerState state;
    EvolutionLog log;
    curriculum::Reordering reordering;
    std::vector<std::string> order;
};

/// Reorder, bootstrap the container on the first group of the order, then
/// incorporate the rest; later cycles replay the same stream.
EvolutionResult evolve(std::span<const DomainGroup> groups, const GraphSpec& graph, const EvolveConfig& config,
                       const EvalHook& hook = {});

/// Same as evolve() with a precomputed reordering.
EvolutionResult evolve(std::span<const DomainGroup> groups, const GraphSpec& graph, const EvolveConfig& config,
                       const curriculum::Reordering& reordering, const EvalHook& hook = {});

/// Order the stream is processed in for the configured mode.
std::vector<std::string> stream_order(const curriculum::Reordering& reordering, OrderMode mode, std::uint64_t seed);

/// Schedule a group receives under the configured mode. Sets the "der_guard"
/// or "clamped" flags it triggers.
elastic::ElasticSchedule schedule_for(const EvolveConfig& config, const std::string& group_id, double length,
                                      double d_max, std::vector<std::string>& flags);

} // namespace synevo::coupler
