#pragma once

// Easy-to-hard ordering of sample groups. Every group gets a probe model
// trained from the same initialization until its loss settles; the gradient
// of the final loss is the group's profile. The group with the smallest
// squared gradient norm is the bench, and the others are ranked by how far
// their gradient vector lies from the bench's.

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "synevo/backbone.hpp"
#include "synevo/domain.hpp"

namespace synevo::curriculum {

struct GradientProfile {
    std::string group_id;
    double sum_sq = 0.0;      // Σ_i ‖∇_i‖²
    std::vector<double> cat;  // ∇_1 ‖ … ‖ ∇_n, each layer row-major
};

struct DifficultyScore {
    std::string group_id;
    std::vector<double> d;  // cat_c − cat_bench
    double length = 0.0;    // ‖d‖₂
};

struct OrderedSequence {
    std::vector<std::string> order;
    std::vector<double> lengths;  // nondecreasing, aligned with `order`
};

struct ProbeConfig {
    ArchConfig arch;
    double learning_rate = 0.01;
    double weight_decay = 0.001;
    ConvergenceConfig convergence;
    std::uint64_t seed = 0;  // shared by every probe
    bool parallel = true;
};

struct Reordering {
    OrderedSequence sequence;
    std::vector<GradientProfile> profiles;  // input order
    std::vector<DifficultyScore> scores;    // input order
    std::string bench_id;
    double d_max = 0.0;
};

GradientProfile make_profile(std::string group_id, const std::vector<std::vector<double>>& layer_gradients);

GradientProfile profile_group(const DomainGroup& group, const GraphSpec& graph, const ProbeConfig& probe);

/// argmin of sum_sq, ties to the smallest group_id.
std::string select_bench(std::span<const GradientProfile> profiles);

DifficultyScore difficulty(const GradientProfile& profile, const GradientProfile& bench);

/// Bench selection, difficulties and the ascending sort, from ready profiles.
Reordering order_profiles(std::vector<GradientProfile> profiles);

Reordering reorder(std::span<const DomainGroup> groups, const GraphSpec& graph, const ProbeConfig& probe);

nlohmann::json ordering_report(const Reordering& r);

} // namespace synevo::curriculum
