// synevo command line: data generation, reordering, evolution, evaluation,
// ablations, zero-shot comparison, sweeps and the entropy audit.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "synevo/config.hpp"
#include "synevo/error.hpp"
#include "synevo/experiments.hpp"
#include "synevo/serialize.hpp"

namespace {

using namespace synevo;
using nlohmann::json;

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string variant;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config_path, "JSON experiment config");
    cmd->add_option("--seed", o.seed, "Root seed (overrides the config)");
    cmd->add_option("--out", o.out, "Output directory (overrides the config)");
    cmd->add_option("--variant", o.variant, "full, REO, Ela, PE, H2E, IL or DER");
}

ExperimentConfig resolve(const CommonOptions& o) {
    ExperimentConfig c = o.config_path.empty() ? config_from_json(json::object()) : load_config(o.config_path);
    if (o.seed) c.seed = *o.seed;
    if (!o.out.empty()) c.output_dir = o.out;
    if (!o.variant.empty()) c.variant = variant_from_string(o.variant);
    c.validate();
    return c;
}

void write(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    write_file_atomic(path, text);
    std::cout << "wrote " << path.string() << '\n';
}

void print_metrics(const std::string& label, const std::optional<MetricsReport>& m) {
    if (!m) {
        std::cout << label << ": n/a\n";
        return;
    }
    std::cout << label << ": MAE " << m->mae << "  RMSE " << m->rmse;
    if (m->mape) std::cout << "  MAPE " << *m->mape;
    std::cout << '\n';
}

int cmd_generate(const ExperimentConfig& c) {
    const auto data = experiments::load_dataset(c);
    json manifest{{"seed", c.seed}, {"domains", json::array()}};
    for (const auto& g : data.groups) {
        const auto path = c.output_dir / (g.group_id + ".csv");
        std::filesystem::create_directories(c.output_dir);
        datagen::export_csv(path, g, datagen::CsvFormat::wide_format);
        manifest["domains"].push_back({{"group_id", g.group_id}, {"file", path.filename().string()},
                                       {"provenance", g.provenance}});
    }
    datagen::export_adjacency_csv(c.output_dir / "adjacency.csv", data.graph.adjacency);
    write(c.output_dir / "manifest.json", manifest.dump(2) + "\n");
    return 0;
}

int cmd_reorder(const ExperimentConfig& c) {
    const auto data = experiments::load_dataset(c);
    const auto evolve = evolve_config_for(c, static_cast<std::size_t>(data.graph.node_count));
    const auto r = curriculum::reorder(data.groups, data.graph, evolve.probe);
    for (std::size_t i = 0; i < r.sequence.order.size(); ++i)
        std::cout << i + 1 << ". " << r.sequence.order[i] << "  l=" << r.sequence.lengths[i] << '\n';
    write(c.output_dir / "ordering.json", curriculum::ordering_report(r).dump(2) + "\n");
    return 0;
}

int cmd_evolve(const ExperimentConfig& c) {
    const auto run = experiments::run_full(c);
    if (run.evolution) {
        for (const auto& r : run.evolution->log.records) {
            if (r.cycle != 0) continue;
            std::cout << r.group_id << (r.bootstrap ? "  bootstrap" : "") << "  h=" << r.decision.h;
            if (r.registry) std::cout << "  d_min=" << r.registry->d_min;
            std::cout << "  p=" << r.schedule.p << "  lambda=" << r.schedule.lambda << '\n';
        }
    }
    print_metrics("test", run.evaluation.test);
    print_metrics("holdout", run.evaluation.holdout);
    std::cout << "artifacts in " << c.output_dir.string() << '\n';
    return 0;
}

int cmd_evaluate(const ExperimentConfig& c, const std::string& checkpoint) {
    const auto path = checkpoint.empty() ? c.output_dir / "checkpoints" / "container.bin" : std::filesystem::path(checkpoint);
    const auto model = load_params(path);
    const auto data = experiments::load_dataset(c);
    const auto eval = experiments::evaluate_served(data, [&](const std::string&) -> const ModelParams& { return model; });
    json groups = json::array();
    for (const auto& g : eval.groups)
        groups.push_back({{"group_id", g.group_id},
                          {"test", g.test ? to_json(*g.test) : json(nullptr)},
                          {"holdout", g.holdout ? to_json(*g.holdout) : json(nullptr)}});
    print_metrics("test", eval.test);
    print_metrics("holdout", eval.holdout);
    write(c.output_dir / "evaluation.json",
          json{{"checkpoint", path.string()},
               {"test", eval.test ? to_json(*eval.test) : json(nullptr)},
               {"holdout", eval.holdout ? to_json(*eval.holdout) : json(nullptr)},
               {"groups", groups}}
                  .dump(2) + "\n");
    return 0;
}

int cmd_ablate(const ExperimentConfig& c, bool single) {
    const auto data = experiments::load_dataset(c);
    if (single) {
        const auto run = experiments::run_ablation(c, data, true);
        print_metrics(to_string(c.variant) + " test", run.evaluation.test);
        print_metrics(to_string(c.variant) + " holdout", run.evaluation.holdout);
        return 0;
    }
    const auto rows = experiments::ablation_suite(
        c, data, {Variant::REO, Variant::Ela, Variant::PE, Variant::H2E, Variant::IL, Variant::DER});
    std::ostringstream csv;
    csv << "variant,status,test_mae,test_rmse,holdout_mae,holdout_rmse,error\n" << std::setprecision(10);
    bool failed = false;
    for (const auto& r : rows) {
        const auto& e = r.evaluation;
        csv << to_string(r.variant) << ',' << (r.error.empty() ? "ok" : "failed") << ',';
        if (e.test) csv << e.test->mae << ',' << e.test->rmse;
        else csv << ',';
        csv << ',';
        if (e.holdout) csv << e.holdout->mae << ',' << e.holdout->rmse;
        else csv << ',';
        csv << ',' << r.error << '\n';
        failed |= !r.error.empty();
        print_metrics(to_string(r.variant) + " holdout", e.holdout);
    }
    write(c.output_dir / "ablation.csv", csv.str());
    return failed ? 1 : 0;
}

int cmd_zeroshot(const ExperimentConfig& c) {
    const auto z = experiments::run_zero_shot(c, experiments::load_dataset(c));
    print_metrics("synevo", z.synevo);
    print_metrics("baseline (" + z.baseline_source + ")", z.baseline);
    write(c.output_dir / "zeroshot.json", z.report.dump(2) + "\n");
    return 0;
}

int cmd_sweep(const ExperimentConfig& c) {
    const auto cells = experiments::sweep(c, experiments::load_dataset(c), true);
    std::size_t failed = 0;
    for (const auto& cell : cells) failed += cell.ok ? 0 : 1;
    std::cout << cells.size() << " cells, " << failed << " failed; wrote " << (c.output_dir / "sweep.csv").string()
              << '\n';
    return 0;
}

int cmd_audit(const ExperimentConfig& c, const std::string& checkpoint) {
    const auto data = experiments::load_dataset(c);
    std::optional<ModelParams> model;
    if (!checkpoint.empty()) model = load_params(checkpoint);
    const auto report = experiments::audit_dataset(c, data, model ? &*model : nullptr);
    for (std::size_t i = 0; i < report.domain_ids.size(); ++i)
        std::cout << report.domain_ids[i] << "  H=" << report.entropies[i] << '\n';
    write(c.output_dir / "entropy.json", audit::to_json(report).dump(2) + "\n");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"synevo: evolutional cross-domain spatiotemporal learning"};
    app.require_subcommand(1);
    CommonOptions opts;
    std::string checkpoint;

    auto* generate = app.add_subcommand("generate", "Write synthetic domains as CSV");
    auto* reorder = app.add_subcommand("reorder", "Curriculum order of the groups");
    auto* evolve = app.add_subcommand("evolve", "Full pipeline with artifacts");
    auto* evaluate = app.add_subcommand("evaluate", "Score a saved model on the dataset");
    auto* ablate = app.add_subcommand("ablate", "One ablation variant, or all of them without --variant");
    auto* zeroshot = app.add_subcommand("zeroshot", "Evolved container vs single-domain backbone on the held-out period");
    auto* sweep = app.add_subcommand("sweep", "p0 x lambda0 x kappa grid");
    auto* audit = app.add_subcommand("audit", "Entropy and mutual-information audit");
    for (auto* cmd : {generate, reorder, evolve, evaluate, ablate, zeroshot, sweep, audit}) add_common(cmd, opts);
    evaluate->add_option("--checkpoint", checkpoint, "Parameter file (.bin or .json)");
    audit->add_option("--checkpoint", checkpoint, "Model for the information-bottleneck value");

    CLI11_PARSE(app, argc, argv);

    try {
        const auto config = resolve(opts);
        if (*generate) return cmd_generate(config);
        if (*reorder) return cmd_reorder(config);
        if (*evolve) return cmd_evolve(config);
        if (*evaluate) return cmd_evaluate(config, checkpoint);
        if (*ablate) return cmd_ablate(config, !opts.variant.empty());
        if (*zeroshot) return cmd_zeroshot(config);
        if (*sweep) return cmd_sweep(config);
        if (*audit) return cmd_audit(config, checkpoint);
    } catch (const synevo::Error& e) {
        std::cerr << "synevo: [" << e.phase() << "] " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "synevo: [io] " << e.what() << '\n';
        return 2;
    }
    return 1;
}
