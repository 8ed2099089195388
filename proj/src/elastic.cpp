#include "synevo/elastic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "synevo/error.hpp"
#include "synevo/serialize.hpp"

namespace synevo::elastic {

namespace {

constexpr const char* kPhase = "elastic";
constexpr int kCheckpointVersion = 1;

double saturate(double base, double tau) { return base * (1.0 - std::exp(-tau)); }

} // namespace

double release_probability(double base, double tau) {
    if (!(base > 0.0 && base <= 1.0)) throw Error(kPhase, "release_probability: base must lie in (0, 1]");
    if (!(tau >= 0.0)) throw Error(kPhase, "release_probability: tau must be nonnegative");
    return saturate(base, tau);
}

ElasticSchedule schedule(double length, double d_max, double p0, double lambda0) {
    if (!(p0 > 0.0 && p0 <= 1.0)) throw Error(kPhase, "schedule: p0 must lie in (0, 1]");
    if (!(lambda0 > 0.0 && lambda0 < 1.0)) throw Error(kPhase, "schedule: lambda0 must lie in (0, 1)");
    if (!(length >= 0.0)) throw Error(kPhase, "schedule: length must be nonnegative");
    if (length > d_max) throw Error(kPhase, "schedule: length exceeds d_max");
    ElasticSchedule s;
    s.length = length;
    s.d_max = d_max;
    s.p = release_probability(p0, d_max - length);
    s.lambda = saturate(lambda0, d_max - length);
    return s;
}

ElasticSchedule schedule_clamped(double length, double d_max, double p0, double lambda0) {
    if (length <= d_max) return schedule(length, d_max, p0, lambda0);
    auto s = schedule(d_max, d_max, p0, lambda0);
    s.length = length;
    s.clamped = true;
    return s;
}

ActivenessMatrix sample_activeness(std::size_t param_count, double p, std::mt19937_64& rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(kPhase, "sample_activeness: p must lie in [0, 1]");
    ActivenessMatrix a;
    a.mask.assign(param_count, 1);
    if (param_count == 0) return a;
    std::size_t kept = param_count;
    if (p >= 1.0) {
        std::fill(a.mask.begin(), a.mask.end(), 0);
        kept = 0;
    } else if (p > 0.0) {
        std::bernoulli_distribution drop(p);
        for (auto& m : a.mask)
            if (drop(rng)) {
                m = 0;
                --kept;
            }
    }
    a.keep_fraction = static_cast<double>(kept) / static_cast<double>(param_count);
    return a;
}

CommonContainerState CommonContainerState::init(const ArchConfig& arch, std::uint64_t seed, double learning_rate) {
    CommonContainerState c;
    c.params = ModelParams::random(arch, seed);
    c.optimizer = OptimizerState::init(c.params.values.size(), learning_rate);
    c.rng_seed = seed;
    c.rng.seed(seed ^ 0x9e3779b97f4a7c15ULL);
    return c;
}

std::vector<std::string> CommonContainerState::absorbed_ids() const {
    std::vector<std::string> ids;
    for (const auto& r : absorbed)
        if (std::find(ids.begin(), ids.end(), r.group_id) == ids.end()) ids.push_back(r.group_id);
    return ids;
}

bool CommonContainerState::has_absorbed(const std::string& group_id) const {
    return std::any_of(absorbed.begin(), absorbed.end(), [&](const AbsorbedRecord& r) { return r.group_id == group_id; });
}

std::vector<double> train_on_group(CommonContainerState& container, const DomainGroup& group, const GraphSpec& graph,
                                   const ElasticSchedule& sched, const GroupTraining& training) {
    if (group.train.empty()) throw Error(kPhase, "group " + group.group_id + " has no training windows");
    if (!(sched.p >= 0.0 && sched.p <= 1.0) || !(sched.lambda >= 0.0))
        throw Error(kPhase, "invalid schedule for group " + group.group_id);

    const std::size_t count = container.params.values.size();
    const double scale = sched.p < 1.0 ? 1.0 / (1.0 - sched.p) : 0.0;
    container.optimizer.weight_decay = sched.lambda;

    std::vector<double> trace;
    std::vector<double> gate(count);
    for (std::size_t epoch = 0; epoch < training.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t steps = 0;
        for (const auto& rows : shuffled_batches(group.train.size(), training.batch_size, container.rng)) {
            double mask_sum = 0.0;
            for (std::size_t r : rows)
                for (double m : group.train.mask_window(r)) mask_sum += m;
            if (mask_sum == 0.0) continue;

            const auto active = sample_activeness(count, sched.p, container.rng);
            for (std::size_t i = 0; i < count; ++i) gate[i] = active.mask[i] * scale;
            auto lg = backward(container.params, group.train, graph, gate, rows);
            loss_sum += lg.loss;
            ++steps;
            if (!std::isfinite(lg.loss))
                throw DivergenceError(kPhase, "container diverged on group " + group.group_id, trace);
            if (scale == 0.0) continue;  // everything dropped: nothing to update

            auto next_params = container.params.values;
            auto next_state = container.optimizer;
            adam_step(next_params, lg.gradient, next_state, active.mask);
            if (!std::all_of(next_params.begin(), next_params.end(), [](double x) { return std::isfinite(x); }))
                throw DivergenceError(kPhase, "container diverged on group " + group.group_id, trace);
            container.params.values = std::move(next_params);
            container.optimizer = std::move(next_state);
        }
        trace.push_back(steps ? loss_sum / static_cast<double>(steps) : 0.0);
    }

    auto recorded = sched;
    recorded.group_id = group.group_id;
    container.absorbed.push_back({group.group_id, recorded, training.cycle});
    return trace;
}

nlohmann::json schedule_to_json(const ElasticSchedule& s) {
    return {{"group_id", s.group_id}, {"length", s.length}, {"d_max", s.d_max},
            {"p", s.p},               {"lambda", s.lambda}, {"clamped", s.clamped}};
}

nlohmann::json checkpoint_to_json(const CommonContainerState& container) {
    nlohmann::json absorbed = nlohmann::json::array();
    for (const auto& r : container.absorbed) {
        auto entry = schedule_to_json(r.schedule);
        entry["cycle"] = r.cycle;
        absorbed.push_back(entry);
    }
    std::ostringstream rng_state;
    rng_state << container.rng;
    return {{"format", "synevo-container"},
            {"version", kCheckpointVersion},
            {"seed", container.rng_seed},
            {"optimizer_steps", container.optimizer.step_count},
            {"learning_rate", container.optimizer.learning_rate},
            {"weight_decay", container.optimizer.weight_decay},
            {"first_moment", container.optimizer.first_moment},
            {"second_moment", container.optimizer.second_moment},
            {"rng_state", rng_state.str()},
            {"params", params_to_json(container.params)},
            {"absorbed", absorbed}};
}

CommonContainerState checkpoint_from_json(const nlohmann::json& j) {
    if (j.value("format", std::string{}) != "synevo-container") throw Error(kPhase, "not a container checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
        throw Error(kPhase, "unsupported checkpoint version " + j.at("version").dump());
    auto c = CommonContainerState::init(arch_from_json(j.at("params").at("arch")), j.at("seed").get<std::uint64_t>(),
                                        j.at("learning_rate").get<double>());
    c.params = params_from_json(j.at("params"));
    c.optimizer.step_count = j.at("optimizer_steps").get<std::uint64_t>();
    c.optimizer.weight_decay = j.value("weight_decay", 0.0);
    if (j.contains("first_moment")) {
        c.optimizer.first_moment = j.at("first_moment").get<std::vector<double>>();
        c.optimizer.second_moment = j.at("second_moment").get<std::vector<double>>();
        if (c.optimizer.first_moment.size() != c.params.values.size() ||
            c.optimizer.second_moment.size() != c.params.values.size())
            throw Error(kPhase, "checkpoint moments do not match the parameter count");
    }
    if (j.contains("rng_state")) {
        std::istringstream in(j.at("rng_state").get<std::string>());
        in >> c.rng;
        if (!in) throw Error(kPhase, "corrupt generator state in checkpoint");
    }
    for (const auto& e : j.at("absorbed")) {
        ElasticSchedule s;
        s.group_id = e.at("group_id").get<std::string>();
        s.length = e.at("length").get<double>();
        s.d_max = e.at("d_max").get<double>();
        s.p = e.at("p").get<double>();
        s.lambda = e.at("lambda").get<double>();
        s.clamped = e.value("clamped", false);
        c.absorbed.push_back({s.group_id, s, e.value("cycle", std::size_t{0})});
    }
    return c;
}

} // namespace synevo::elastic
