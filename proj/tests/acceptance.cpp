// Acceptance run: one PASS/FAIL line per criterion. Exits nonzero when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>

#include "fixtures.hpp"
#include "synevo/coupler.hpp"
#include "synevo/curriculum.hpp"
#include "synevo/datagen.hpp"
#include "synevo/elastic.hpp"
#include "synevo/experiments.hpp"
#include "synevo/info_audit.hpp"
#include "synevo/personality.hpp"
#include "synevo/seed.hpp"

using namespace synevo;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ExperimentConfig suite_config(std::uint64_t seed, std::size_t domains) {
    ExperimentConfig c;
    c.seed = seed;
    c.dataset.synthetic.domain_count = domains;
    c.layout.steps_per_day = c.dataset.synthetic.steps_per_day;
    c.layout.periods_per_day = 4;
    return c;
}

Outcome gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    double backbone = 0.0, extractor = 0.0;
    const std::size_t n = 25;
    for (std::uint64_t s = 1; s <= n; ++s) {
        backbone = std::max(backbone, fixtures::backbone_gradient_mismatch(fixtures::random_backbone(s)));
        extractor = std::max(extractor, fixtures::extractor_gradient_mismatch(fixtures::random_extractor(s, 3, 4)));
    }
    const double t = seconds_since(t0);
    return {backbone < 1e-5 && extractor < 1e-5 && t < 30.0,
            fmt("%zu instances each, max rel err backbone %.2e extractor %.2e, %.2fs", n, backbone, extractor, t)};
}

Outcome schedule_oracle() {
    std::mt19937_64 rng(derive_seed(1, 7));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
        const double d_max = 10.0 * u(rng);
        const double l = d_max * u(rng);
        const double p0 = std::max(1e-6, u(rng));
        const double lambda0 = std::clamp(u(rng), 1e-6, 1.0 - 1e-6);
        const auto s = elastic::schedule(l, d_max, p0, lambda0);
        if (s.p != elastic::release_probability(p0, d_max - l)) ++mismatches;
        if (s.lambda != elastic::release_probability(lambda0, d_max - l)) ++mismatches;
    }
    std::size_t endpoint_failures = 0;
    for (double d : {0.0, 0.5, 2.1, 17.0}) {
        const auto s = elastic::schedule(d, d, 0.7, 0.05);
        if (s.p != 0.0 || s.lambda != 0.0) ++endpoint_failures;
    }
    return {mismatches == 0 && endpoint_failures == 0,
            fmt("1000 triples, %zu mismatches, %zu endpoint failures", mismatches, endpoint_failures)};
}

Outcome curriculum_properties() {
    const auto cfg = suite_config(1, 4);
    const auto data = experiments::load_dataset(cfg);
    const auto evolve_cfg = evolve_config_for(cfg, data.graph.node_count);
    const auto r = curriculum::reorder(data.groups, data.graph, evolve_cfg.probe);
    const auto again = curriculum::reorder(data.groups, data.graph, evolve_cfg.probe);

    const bool bench_first = r.sequence.order.front() == r.bench_id && r.sequence.lengths.front() == 0.0;
    std::set<std::string> ids, ordered(r.sequence.order.begin(), r.sequence.order.end());
    for (const auto& g : data.groups) ids.insert(g.group_id);
    const bool permutation = ids == ordered && r.sequence.order.size() == data.groups.size();

    bool invariant = true;
    for (double scale : {1e-3, 0.37, 3.7, 250.0}) {
        auto scaled = r.profiles;
        for (auto& p : scaled) {
            for (auto& v : p.cat) v *= scale;
            p.sum_sq *= scale * scale;
        }
        invariant = invariant && curriculum::order_profiles(scaled).sequence.order == r.sequence.order;
    }
    const bool reproducible = again.sequence.order == r.sequence.order && again.sequence.lengths == r.sequence.lengths;
    return {bench_first && permutation && invariant && reproducible,
            fmt("bench first at length 0: %d, permutation: %d, rescale invariant: %d, reproducible: %d", bench_first,
                permutation, invariant, reproducible)};
}

Outcome gate_table() {
    bool table = true;
    for (double k : {1e-3, 0.1, 1.0, 1e3}) {
        table = table && coupler::gate(0.0, k).h == 0 && coupler::gate(k / 2, k).h == 1 && coupler::gate(k, k).h == 0 &&
                coupler::gate(2 * k, k).h == 0;
    }
    bool monotone = true;
    const std::vector<double> kappas{1e-4, 1e-2, 0.1, 0.5, 1.0, 10.0, 1e6};
    for (double d : {1e-6, 1e-3, 0.05, 0.3, 2.0, 50.0})
        for (std::size_t i = 0; i + 1 < kappas.size(); ++i)
            monotone = monotone && coupler::gate(d, kappas[i]).h <= coupler::gate(d, kappas[i + 1]).h;
    return {table && monotone, fmt("truth table {0,k/2,k,2k}->{0,1,0,0}: %d, monotone in kappa: %d", table, monotone)};
}

Outcome contrastive_separation() {
    const auto t0 = std::chrono::steady_clock::now();
    auto cfg = suite_config(1, 2);
    cfg.dataset.synthetic.rho = 0.2;
    const auto data = experiments::load_dataset(cfg);
    const double margin = 1.0;
    auto ex = personality::Extractor::init(16, data.groups[0].train.input_stride(), derive_seed(cfg.seed, 2), margin);
    std::vector<const DomainGroup*> groups{&data.groups[0], &data.groups[1]};
    personality::PairSampling sampling;
    sampling.seed = derive_seed(cfg.seed, 3);
    const std::size_t epochs = 100;
    personality::train_extractor(ex, groups, sampling, epochs);

    double intra = 0.0, inter = 0.0;
    std::size_t n_intra = 0, n_inter = 0, far = 0;
    for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = a; b < 2; ++b) {
            const auto& wa = data.groups[a].test;
            const auto& wb = data.groups[b].test;
            for (std::size_t i = 0; i < wa.size(); i += 3)
                for (std::size_t j = 0; j < wb.size(); j += 3) {
                    if (a == b && i == j) continue;
                    const double d = personality::distance(ex.apply(wa.input_window(i)), ex.apply(wb.input_window(j)));
                    if (a == b) {
                        intra += d;
                        ++n_intra;
                    } else {
                        inter += d;
                        ++n_inter;
                        far += d >= margin ? 1 : 0;
                    }
                }
        }
    intra /= static_cast<double>(n_intra);
    inter /= static_cast<double>(n_inter);
    const double far_fraction = static_cast<double>(far) / static_cast<double>(n_inter);
    const double t = seconds_since(t0);
    return {intra < inter && far_fraction >= 0.9 && t < 120.0,
            fmt("%zu epochs, intra %.4f inter %.4f, %.1f%% of %zu held-out inter pairs >= m, %.1fs", epochs, intra,
                inter, 100.0 * far_fraction, n_inter, t)};
}

Outcome isolation_on_rejection() {
    auto cfg = suite_config(1, 4);
    cfg.dataset.synthetic.domain_rhos = {0.9, 0.9, 0.9, 0.0};
    const auto data = experiments::load_dataset(cfg);
    const auto evolve_cfg = evolve_config_for(cfg, data.graph.node_count);
    auto state = coupler::evolve(std::span(data.groups).first(3), data.graph, evolve_cfg).state;
    const auto before = state.container.params.values;
    const auto rec = coupler::incorporate(state, data.groups[3], data.graph, evolve_cfg);
    const bool unchanged = state.container.params.values == before;
    return {rec.decision.h == 0 && unchanged,
            fmt("%s: d_min %.4f kappa %.3g h=%d, container bitwise unchanged: %d", rec.group_id.c_str(),
                rec.registry ? rec.registry->d_min : -1.0, evolve_cfg.kappa, rec.decision.h, unchanged)};
}

Outcome cycle_behaviour() {
    auto cfg = suite_config(1, 3);
    cfg.evolve.cycles = 2;
    const auto run = experiments::run_full(cfg, experiments::load_dataset(cfg), false);
    const auto& rec = run.evolution->log.records;
    const std::size_t k = rec.size() / 2;
    bool each = true;
    double reduction = 0.0;
    std::string pairs;
    for (std::size_t i = 0; i < k; ++i) {
        each = each && rec[i + k].final_loss <= rec[i].final_loss;
        reduction += 1.0 - rec[i + k].final_loss / rec[i].final_loss;
        pairs += fmt(" %s %.4f->%.4f", rec[i].group_id.c_str(), rec[i].final_loss, rec[i + k].final_loss);
    }
    reduction /= static_cast<double>(k);
    return {each && reduction >= 0.10,
            fmt("cycle-2 <= cycle-1 for every group: %d, mean reduction %.1f%%;%s", each, 100.0 * reduction,
                pairs.c_str())};
}

Outcome zero_shot_direction() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cfg = suite_config(1, 4);
    const auto z = experiments::run_zero_shot(cfg, experiments::load_dataset(cfg));
    const double rel = 1.0 - z.synevo.mae / z.baseline.mae;
    const double t = seconds_since(t0);
    return {rel >= 0.10 && t < 600.0,
            fmt("seed 1, evolved %.4f vs single-domain %.4f, improvement %.1f%% (need >= 10%%), %.1fs", z.synevo.mae,
                z.baseline.mae, 100.0 * rel, t)};
}

struct SuiteSeed {
    double full, reo, ela, pe, h2e;
};

std::vector<SuiteSeed> ablation_runs() {
    std::vector<SuiteSeed> out;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto cfg = suite_config(seed, 3);
        const auto rows = experiments::ablation_suite(cfg, experiments::load_dataset(cfg),
                                                      {Variant::REO, Variant::Ela, Variant::PE, Variant::H2E});
        SuiteSeed s{};
        for (const auto& r : rows) {
            const double mae = r.error.empty() ? r.evaluation.test->mae : INFINITY;
            switch (r.variant) {
            case Variant::full: s.full = mae; break;
            case Variant::REO: s.reo = mae; break;
            case Variant::Ela: s.ela = mae; break;
            case Variant::PE: s.pe = mae; break;
            case Variant::H2E: s.h2e = mae; break;
            default: break;
            }
        }
        out.push_back(s);
    }
    return out;
}

Outcome ablation_direction(const std::vector<SuiteSeed>& runs) {
    SuiteSeed mean{};
    std::size_t ela_worst = 0;
    std::string per_seed;
    for (const auto& s : runs) {
        mean.full += s.full / 3.0;
        mean.reo += s.reo / 3.0;
        mean.ela += s.ela / 3.0;
        mean.pe += s.pe / 3.0;
        ela_worst += s.ela >= std::max(s.reo, s.pe) ? 1 : 0;
        per_seed += fmt(" [full %.4f REO %.4f Ela %.4f PE %.4f]", s.full, s.reo, s.ela, s.pe);
    }
    const bool full_best = mean.full <= mean.reo && mean.full <= mean.ela && mean.full <= mean.pe;
    return {full_best && ela_worst >= 2,
            fmt("mean test MAE full %.4f REO %.4f Ela %.4f PE %.4f (full best: %d), Ela worst in %zu/3 seeds;%s",
                mean.full, mean.reo, mean.ela, mean.pe, full_best, ela_worst, per_seed.c_str())};
}

Outcome ordering_direction(const std::vector<SuiteSeed>& runs) {
    std::size_t wins = 0;
    std::string per_seed;
    for (const auto& s : runs) {
        wins += s.full <= s.h2e ? 1 : 0;
        per_seed += fmt(" [full %.4f H2E %.4f]", s.full, s.h2e);
    }
    return {wins >= 2, fmt("full <= H2E in %zu/3 seeds;%s", wins, per_seed.c_str())};
}

Outcome information_audit() {
    const audit::HistogramEstimator est;
    auto summaries = [](double rho) {
        datagen::SyntheticConfig c;
        c.timesteps = 100000;
        c.rho = rho;
        const auto g = datagen::gen_graph(c);
        std::vector<std::vector<double>> out;
        std::vector<std::string> ids;
        for (const auto& d : datagen::gen_series(c, g)) {
            out.push_back(audit::pooled_summary(d.series));
            ids.push_back(d.group_id);
        }
        return std::pair{ids, out};
    };
    const auto [ids9, s9] = summaries(0.9);
    const auto related = audit::entropy_report(ids9, s9, est);
    const auto [ids0, s0] = summaries(0.0);
    const auto unrelated = audit::entropy_report(ids0, s0, est);

    double min_related = INFINITY, max_unrelated = 0.0, worst_rise = -INFINITY;
    for (std::size_t i = 0; i < s9.size(); ++i)
        for (std::size_t j = i + 1; j < s9.size(); ++j) {
            min_related = std::min(min_related, related.pairwise_mi[i][j]);
            max_unrelated = std::max(max_unrelated, unrelated.pairwise_mi[i][j]);
        }
    for (std::size_t i = 0; i + 1 < related.chain.size(); ++i)
        worst_rise = std::max(worst_rise, related.chain[i + 1] - related.chain[i]);
    return {min_related > 0.05 && worst_rise <= 0.05 && max_unrelated < 0.01,
            fmt("n=100000, rho=0.9 min pairwise MI %.4f, chain max rise %.4f; rho=0 max pairwise MI %.5f nats",
                min_related, worst_rise, max_unrelated)};
}

Outcome absorption_monotone() {
    const auto cfg = suite_config(1, 4);
    const auto run = experiments::run_full(cfg, experiments::load_dataset(cfg), false);
    const auto curve = experiments::absorption_curve(*run.evolution);
    std::size_t violations = 0;
    bool within = true;
    std::string values;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        values += fmt(" %.4f", curve[i].mae);
        if (i == 0 || curve[i].mae <= curve[i - 1].mae) continue;
        ++violations;
        within = within && curve[i].mae <= 1.02 * curve[i - 1].mae;
    }
    return {curve.size() == 4 && violations <= 1 && within,
            fmt("held-out MAE for k=1..%zu:%s (%zu increases)", curve.size(), values.c_str(), violations)};
}

Outcome dropout_realization() {
    std::mt19937_64 rng(derive_seed(1, 13));
    const std::size_t n = 10000;
    bool ok = true;
    std::string detail;
    for (double p : {0.1, 0.3, 0.5}) {
        const auto m = elastic::sample_activeness(n, p, rng);
        const double zeros = static_cast<double>(std::count(m.mask.begin(), m.mask.end(), 0)) / n;
        const double sigma = std::sqrt(p * (1.0 - p) / n);
        ok = ok && std::abs(zeros - p) <= 3.0 * sigma;
        detail += fmt(" p=%.1f: %.4f (3 sigma %.4f);", p, zeros, 3.0 * sigma);
    }
    return {ok, "zero fraction over 10000 entries," + detail};
}

} // namespace

int main() {
    std::size_t failures = 0;
    auto report = [&](int n, const std::function<Outcome()>& check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("Criterion %d: %s %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    };
    report(1, gradients);
    report(2, schedule_oracle);
    report(3, curriculum_properties);
    report(4, gate_table);
    report(5, contrastive_separation);
    report(6, isolation_on_rejection);
    report(7, cycle_behaviour);
    report(8, zero_shot_direction);
    std::vector<SuiteSeed> suite;
    try {
        suite = ablation_runs();
    } catch (const std::exception& e) {
        std::printf("ablation suite error: %s\n", e.what());
    }
    report(9, [&] { return suite.size() == 3 ? ablation_direction(suite) : Outcome{false, "ablation suite failed"}; });
    report(10, [&] { return suite.size() == 3 ? ordering_direction(suite) : Outcome{false, "ablation suite failed"}; });
    report(11, information_audit);
    report(12, absorption_monotone);
    report(13, dropout_realization);
    std::printf("%zu of 13 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
