#include "synevo/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include "synevo/error.hpp"

namespace synevo::curriculum {

namespace {
constexpr const char* kPhase = "curriculum";
}

GradientProfile make_profile(std::string group_id, const std::vector<std::vector<double>>& layer_gradients) {
    GradientProfile p;
    p.group_id = std::move(group_id);
    for (const auto& layer : layer_gradients) {
        double layer_sq = 0.0;
        for (double g : layer) layer_sq += g * g;
        p.sum_sq += layer_sq;
        p.cat.insert(p.cat.end(), layer.begin(), layer.end());
    }
    return p;
}

GradientProfile profile_group(const DomainGroup& group, const GraphSpec& graph, const ProbeConfig& probe) {
    if (group.train.empty()) throw Error(kPhase, "group " + group.group_id + " has no training windows");
    try {
        auto trained = train_to_convergence(ModelParams::random(probe.arch, probe.seed), group.train, graph,
                                            probe.learning_rate, probe.weight_decay, probe.convergence);
        const ModelParams grad{probe.arch, std::move(trained.gradient)};
        return make_profile(group.group_id, grad.unflatten());
    } catch (const DivergenceError& e) {
        throw DivergenceError(kPhase, "probe for group " + group.group_id + " diverged (" + e.what() + ")", e.trace());
    }
}

std::string select_bench(std::span<const GradientProfile> profiles) {
    if (profiles.empty()) throw Error(kPhase, "select_bench: no profiles");
    const auto* best = &profiles.front();
    for (const auto& p : profiles.subspan(1)) {
        if (p.sum_sq < best->sum_sq || (p.sum_sq == best->sum_sq && p.group_id < best->group_id)) best = &p;
    }
    return best->group_id;
}

DifficultyScore difficulty(const GradientProfile& profile, const GradientProfile& bench) {
    if (profile.cat.size() != bench.cat.size())
        throw ShapeError(kPhase, "difficulty: gradient vectors of " + profile.group_id + " and " + bench.group_id +
                                     " differ in length");
    DifficultyScore s;
    s.group_id = profile.group_id;
    s.d.resize(profile.cat.size());
    double sq = 0.0;
    for (std::size_t i = 0; i < s.d.size(); ++i) {
        s.d[i] = profile.cat[i] - bench.cat[i];
        sq += s.d[i] * s.d[i];
    }
    s.length = std::sqrt(sq);
    return s;
}

Reordering order_profiles(std::vector<GradientProfile> profiles) {
    Reordering r;
    r.bench_id = select_bench(profiles);
    const auto bench = std::find_if(profiles.begin(), profiles.end(),
                                    [&](const GradientProfile& p) { return p.group_id == r.bench_id; });
    for (const auto& p : profiles) r.scores.push_back(difficulty(p, *bench));

    std::vector<std::size_t> idx(profiles.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto& sa = r.scores[a];
        const auto& sb = r.scores[b];
        // The bench leads even if another group also sits at distance zero.
        const bool a_bench = sa.group_id == r.bench_id;
        const bool b_bench = sb.group_id == r.bench_id;
        if (a_bench != b_bench) return a_bench;
        if (sa.length != sb.length) return sa.length < sb.length;
        return sa.group_id < sb.group_id;
    });
    for (std::size_t i : idx) {
        r.sequence.order.push_back(r.scores[i].group_id);
        r.sequence.lengths.push_back(r.scores[i].length);
        r.d_max = std::max(r.d_max, r.scores[i].length);
    }
    r.profiles = std::move(profiles);
    return r;
}

Reordering reorder(std::span<const DomainGroup> groups, const GraphSpec& graph, const ProbeConfig& probe) {
    if (groups.empty()) throw Error(kPhase, "reorder: no groups");
    std::vector<GradientProfile> profiles;
    profiles.reserve(groups.size());
    if (probe.parallel && groups.size() > 1) {
        std::vector<std::future<GradientProfile>> jobs;
        for (const auto& g : groups)
            jobs.push_back(std::async(std::launch::async, [&g, &graph, &probe] { return profile_group(g, graph, probe); }));
        for (auto& j : jobs) profiles.push_back(j.get());
    } else {
        for (const auto& g : groups) profiles.push_back(profile_group(g, graph, probe));
    }
    return order_profiles(std::move(profiles));
}

nlohmann::json ordering_report(const Reordering& r) {
    nlohmann::json groups = nlohmann::json::array();
    for (std::size_t i = 0; i < r.profiles.size(); ++i)
        groups.push_back({{"group_id", r.profiles[i].group_id},
                          {"sum_sq", r.profiles[i].sum_sq},
                          {"length", r.scores[i].length}});
    return {{"bench", r.bench_id}, {"d_max", r.d_max}, {"order", r.sequence.order},
            {"lengths", r.sequence.lengths}, {"groups", groups}};
}

} // namespace synevo::curriculum
