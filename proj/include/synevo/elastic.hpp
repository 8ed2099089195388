#pragma once

// The common container: one set of shared parameters trained group by group
// along the curriculum. How much of the model is active for a group follows
// the saturating release law P0·(1 − e^{−τ}) with τ = d_max − l(d_c): the
// easy groups train under heavy parameter dropout and weight decay, the
// hardest group trains with the full model.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "synevo/backbone.hpp"
#include "synevo/domain.hpp"

namespace synevo::elastic {

/// P0·(1 − e^{−τ}), 0 < P0 ≤ 1, τ ≥ 0.
double release_probability(double base, double tau);

struct ElasticSchedule {
    std::string group_id;
    double length = 0.0;
    double d_max = 0.0;
    double p = 0.0;       // dropout probability on parameters
    double lambda = 0.0;  // weight decay
    bool clamped = false; // length exceeded d_max and the exponent was clamped at 0
};

/// p = p0(1 − e^{l − d_max}), λ = λ0(1 − e^{l − d_max}). Throws if l > d_max.
ElasticSchedule schedule(double length, double d_max, double p0, double lambda0);

/// Same as schedule() but a length beyond d_max yields p = λ = 0 with
/// `clamped` set, for groups that arrive after the reorder pass.
ElasticSchedule schedule_clamped(double length, double d_max, double p0, double lambda0);

struct ActivenessMatrix {
    std::vector<std::uint8_t> mask;
    double keep_fraction = 1.0;
};

/// Each entry is 0 with probability p, independently.
ActivenessMatrix sample_activeness(std::size_t param_count, double p, std::mt19937_64& rng);

struct AbsorbedRecord {
    std::string group_id;
    ElasticSchedule schedule;
    std::size_t cycle = 0;
};

struct CommonContainerState {
    ModelParams params;
    OptimizerState optimizer;
    std::vector<AbsorbedRecord> absorbed;  // append-only
    std::uint64_t rng_seed = 0;
    std::mt19937_64 rng;

    static CommonContainerState init(const ArchConfig& arch, std::uint64_t seed, double learning_rate);

    /// Distinct absorbed group ids in first-absorption order.
    std::vector<std::string> absorbed_ids() const;
    bool has_absorbed(const std::string& group_id) const;
};

struct GroupTraining {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    std::size_t cycle = 0;
};

/// Trains the container on `group.train` under `sched`: a fresh activeness
/// mask per step with inverted scaling 1/(1−p), dropped entries left
/// untouched by the optimizer, weight decay λ. Appends the group to the
/// absorbed list and returns the per-epoch mean training loss. On divergence
/// the container keeps its last finite parameters.
std::vector<double> train_on_group(CommonContainerState& container, const DomainGroup& group, const GraphSpec& graph,
                                   const ElasticSchedule& sched, const GroupTraining& training);

nlohmann::json schedule_to_json(const ElasticSchedule& s);
nlohmann::json checkpoint_to_json(const CommonContainerState& container);
CommonContainerState checkpoint_from_json(const nlohmann::json& j);

} // namespace synevo::elastic
