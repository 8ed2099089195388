#include "synevo/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <future>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "synevo/error.hpp"
#include "synevo/seed.hpp"
#include "synevo/serialize.hpp"

namespace synevo::experiments {

namespace {

constexpr const char* kPhase = "harness";

using nlohmann::json;

std::optional<MetricsReport> mean_report(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) return std::nullopt;
    MetricsReport m;
    double mape = 0.0;
    bool mape_ok = true;
    for (const auto& r : reports) {
        m.mae += r.mae;
        m.rmse += r.rmse;
        m.count += r.count;
        if (r.mape) mape += *r.mape;
        else mape_ok = false;
    }
    const auto n = static_cast<double>(reports.size());
    m.mae /= n;
    m.rmse /= n;
    if (mape_ok) m.mape = mape / n;
    return m;
}

json optional_json(const std::optional<MetricsReport>& m) { return m ? to_json(*m) : json(nullptr); }

json evaluation_json(const Evaluation& e) {
    json groups = json::array();
    for (const auto& g : e.groups)
        groups.push_back({{"group_id", g.group_id},
                          {"served_by", g.served_by},
                          {"test", optional_json(g.test)},
                          {"holdout", optional_json(g.holdout)}});
    return {{"test", optional_json(e.test)}, {"holdout", optional_json(e.holdout)}, {"groups", groups}};
}

// Plain training of one model on one group: no dropout, no decay.
std::vector<double> train_plain(ModelParams& model, const DomainGroup& group, const GraphSpec& graph,
                                const coupler::EvolveConfig& evolve, std::size_t epochs, std::uint64_t seed) {
    auto holder = elastic::CommonContainerState::init(model.arch, seed, evolve.learning_rate);
    holder.params = model;
    elastic::ElasticSchedule none;
    none.group_id = group.group_id;
    auto training = evolve.training;
    training.epochs = epochs;
    auto trace = elastic::train_on_group(holder, group, graph, none, training);
    model = std::move(holder.params);
    return trace;
}

std::size_t container_epochs(const coupler::EvolutionLog& log) {
    std::size_t total = 0;
    for (const auto& r : log.records)
        if (r.decision.h == 1) total += r.trace.size();
    return total;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    write_file_atomic(path, text);
}

std::string cell_name(std::size_t index) {
    std::ostringstream s;
    s << "cell_" << std::setw(3) << std::setfill('0') << index;
    return s.str();
}

std::string number(double v) {
    std::ostringstream s;
    s << std::setprecision(10) << v;
    return s.str();
}

} // namespace

Dataset load_dataset(const ExperimentConfig& config) {
    Dataset data;
    auto layout = config.layout;
    if (config.dataset.kind == DatasetSpec::Kind::synthetic) {
        auto syn = config.dataset.synthetic;
        syn.seed = derive_seed(config.seed, 0);
        data.graph = datagen::gen_graph(syn);
        if (layout.steps_per_day == 0) layout.steps_per_day = syn.steps_per_day;
        data.groups = datagen::gen_domains(syn, data.graph, layout);
        return data;
    }
    for (const auto& path : config.dataset.csv_paths) {
        datagen::CsvSchema schema;
        schema.format = config.dataset.csv_format;
        data.groups.push_back(datagen::load_csv(path, schema));
    }
    const auto nodes = static_cast<std::size_t>(data.groups.front().series.cols());
    for (const auto& g : data.groups)
        if (static_cast<std::size_t>(g.series.cols()) != nodes)
            throw Error(kPhase, "csv groups disagree on node count (" + g.group_id + ")");
    Matrix adjacency;
    if (!config.dataset.adjacency_path.empty()) {
        adjacency = datagen::load_adjacency_csv(config.dataset.adjacency_path);
    } else {
        adjacency = Matrix::Zero(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(nodes));
        for (std::size_t i = 0; nodes > 1 && i < nodes; ++i) {
            const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>((i + 1) % nodes);
            adjacency(a, b) = adjacency(b, a) = 1.0;
        }
    }
    if (static_cast<std::size_t>(adjacency.rows()) != nodes) throw Error(kPhase, "adjacency size does not match the data");
    data.graph = GraphSpec::from_adjacency(adjacency);
    for (auto& g : data.groups) datagen::attach_windows(g, layout);
    return data;
}

Evaluation evaluate_served(const Dataset& data, const std::function<const ModelParams&(const std::string&)>& model_for) {
    Evaluation e;
    std::vector<MetricsReport> tests, holdouts;
    for (const auto& g : data.groups) {
        GroupEval ge;
        ge.group_id = g.group_id;
        const auto& model = model_for(g.group_id);
        if (!g.test.empty()) {
            ge.test = evaluate(model, g.test, data.graph);
            tests.push_back(*ge.test);
        }
        if (!g.holdout.empty()) {
            ge.holdout = evaluate(model, g.holdout, data.graph);
            holdouts.push_back(*ge.holdout);
        }
        e.groups.push_back(std::move(ge));
    }
    e.test = mean_report(tests);
    e.holdout = mean_report(holdouts);
    return e;
}

std::optional<MetricsReport> holdout_metrics(const ModelParams& model, const Dataset& data) {
    std::vector<MetricsReport> parts;
    for (const auto& g : data.groups)
        if (!g.holdout.empty()) parts.push_back(evaluate(model, g.holdout, data.graph));
    if (parts.empty()) return std::nullopt;
    return pool(parts);
}

std::string losses_csv(const coupler::EvolutionLog& log) {
    std::ostringstream out;
    out << "epoch,group_id,cycle,loss\n" << std::setprecision(17);
    for (const auto& r : log.records)
        for (std::size_t e = 0; e < r.trace.size(); ++e)
            out << e + 1 << ',' << r.group_id << ',' << r.cycle + 1 << ',' << r.trace[e] << '\n';
    return out.str();
}

audit::EntropyReport audit_dataset(const ExperimentConfig& config, const Dataset& data, const ModelParams* model) {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> summaries;
    for (const auto& g : data.groups) {
        ids.push_back(g.group_id);
        summaries.push_back(audit::pooled_summary(g.series));
    }
    auto report = audit::entropy_report(ids, summaries, config.estimator);
    if (model) {
        // Window-level scalar summaries of input X, prediction Z and target Y.
        std::vector<double> x, z, y;
        for (const auto& g : data.groups) {
            if (g.test.empty()) continue;
            const auto pred = forward(*model, g.test, data.graph);
            const std::size_t stride = g.test.target_stride();
            for (std::size_t s = 0; s < g.test.size(); ++s) {
                const auto in = g.test.input_window(s);
                const auto tg = g.test.target_window(s);
                x.push_back(std::accumulate(in.begin(), in.end(), 0.0) / static_cast<double>(in.size()));
                y.push_back(std::accumulate(tg.begin(), tg.end(), 0.0) / static_cast<double>(tg.size()));
                const auto first = pred.begin() + static_cast<std::ptrdiff_t>(s * stride);
                z.push_back(std::accumulate(first, first + static_cast<std::ptrdiff_t>(stride), 0.0) /
                            static_cast<double>(stride));
            }
        }
        if (x.size() >= config.estimator.bins) {
            report.has_ib = true;
            report.i_xz = audit::mutual_information(x, z, config.estimator);
            report.i_zy = audit::mutual_information(z, y, config.estimator);
            report.beta = config.ib_beta;
            report.ib_value = audit::ib_objective(report.i_xz, report.i_zy, config.ib_beta);
        }
    }
    return report;
}

RunResult run_full(const ExperimentConfig& config, bool write_artifacts) {
    return run_full(config, load_dataset(config), write_artifacts);
}

RunResult run_full(const ExperimentConfig& config, const Dataset& data, bool write_artifacts) {
    if (data.groups.empty()) throw Error(kPhase, "dataset has no groups");
    const auto nodes = static_cast<std::size_t>(data.graph.node_count);
    const auto evolve_cfg = evolve_config_for(config, nodes);

    RunResult result;
    result.variant = config.variant;
    json report{{"variant", to_string(config.variant)}, {"seed", config.seed}, {"config", config_to_json(config)}};

    if (config.variant == Variant::IL) {
        const std::size_t epochs = evolve_cfg.training.epochs * evolve_cfg.cycles;
        json checkpoints = json::array();
        for (const auto& g : data.groups) {
            const auto seed = derive_seed(evolve_cfg.seed, name_hash(g.group_id));
            auto model = ModelParams::random(evolve_cfg.probe.arch, seed);
            result.independent_traces[g.group_id] = train_plain(model, g, data.graph, evolve_cfg, epochs, seed);
            result.independent.emplace(g.group_id, std::move(model));
            checkpoints.push_back(g.group_id);
        }
        result.evaluation = evaluate_served(data, [&](const std::string& id) -> const ModelParams& {
            return result.independent.at(id);
        });
        for (auto& g : result.evaluation.groups) g.served_by = "independent";
        report["independent_models"] = checkpoints;
        report["absorbed"] = json::array();
    } else {
        coupler::EvalHook hook = [&](const ModelParams& container) {
            auto m = holdout_metrics(container, data);
            return m ? *m : MetricsReport{};
        };
        result.evolution = coupler::evolve(data.groups, data.graph, evolve_cfg, hook);
        const auto& state = result.evolution->state;
        result.evaluation = evaluate_served(data, [&](const std::string& id) -> const ModelParams& {
            return state.model_for(id);
        });
        for (auto& g : result.evaluation.groups) g.served_by = state.absorbed(g.group_id) ? "container" : "isolated";
        json decisions = json::array();
        for (const auto& r : result.evolution->log.records) {
            if (r.cycle != 0) continue;
            decisions.push_back({{"group_id", r.group_id},
                                 {"bootstrap", r.bootstrap},
                                 {"forced", r.forced},
                                 {"h", r.decision.h},
                                 {"d_min", r.registry ? json(r.registry->d_min) : json(nullptr)},
                                 {"kappa", r.decision.kappa},
                                 {"p", r.schedule.p},
                                 {"lambda", r.schedule.lambda},
                                 {"flags", r.flags}});
        }
        report["ordering"] = curriculum::ordering_report(result.evolution->reordering);
        report["stream_order"] = result.evolution->order;
        report["gate_decisions"] = decisions;
        report["absorbed"] = state.container.absorbed_ids();
        std::vector<std::string> isolated;
        for (const auto& [id, params] : state.isolated) isolated.push_back(id);
        report["isolated"] = isolated;
        json curve = json::array();
        for (const auto& m : absorption_curve(*result.evolution)) curve.push_back(to_json(m));
        report["absorption_curve"] = curve;
    }
    report["evaluation"] = evaluation_json(result.evaluation);
    result.report = report;

    if (write_artifacts) {
        const auto& dir = config.output_dir;
        std::filesystem::create_directories(dir / "checkpoints");
        write_text(dir / "report.json", report.dump(2) + "\n");
        const ModelParams* audited = nullptr;
        if (result.evolution) {
            const auto& evo = *result.evolution;
            write_text(dir / "losses.csv", losses_csv(evo.log));
            write_text(dir / "evolution.jsonl", evo.log.to_jsonl());
            write_text(dir / "checkpoints" / "container.json", elastic::checkpoint_to_json(evo.state.container).dump() + "\n");
            save_params(dir / "checkpoints" / "container.bin", evo.state.container.params);
            write_text(dir / "checkpoints" / "extractor.json",
                       personality::extractor_to_json(evo.state.extractor).dump() + "\n");
            for (const auto& [id, params] : evo.state.isolated)
                save_params(dir / "checkpoints" / ("isolated_" + id + ".bin"), params);
            audited = &evo.state.container.params;
        } else {
            std::ostringstream out;
            out << "epoch,group_id,cycle,loss\n" << std::setprecision(17);
            for (const auto& [id, trace] : result.independent_traces)
                for (std::size_t e = 0; e < trace.size(); ++e) out << e + 1 << ',' << id << ",1," << trace[e] << '\n';
            write_text(dir / "losses.csv", out.str());
            write_text(dir / "evolution.jsonl", "");
            for (const auto& [id, params] : result.independent)
                save_params(dir / "checkpoints" / ("independent_" + id + ".bin"), params);
        }
        write_text(dir / "entropy.json", audit::to_json(audit_dataset(config, data, audited)).dump(2) + "\n");
    }
    return result;
}

RunResult run_ablation(const ExperimentConfig& config, const Dataset& data, bool write_artifacts) {
    if (config.variant == Variant::full) throw Error(kPhase, "run_ablation needs a variant other than full");
    return run_full(config, data, write_artifacts);
}

std::vector<AblationRow> ablation_suite(const ExperimentConfig& config, const Dataset& data,
                                        const std::vector<Variant>& variants) {
    std::vector<Variant> all{Variant::full};
    for (auto v : variants)
        if (v != Variant::full) all.push_back(v);
    std::vector<std::future<AblationRow>> jobs;
    for (auto v : all) {
        jobs.push_back(std::async(std::launch::async, [&config, &data, v] {
            AblationRow row{v, {}, {}};
            auto cfg = config;
            cfg.variant = v;
            try {
                row.evaluation = run_full(cfg, data, false).evaluation;
            } catch (const std::exception& e) {
                row.error = e.what();
            }
            return row;
        }));
    }
    std::vector<AblationRow> rows;
    for (auto& j : jobs) rows.push_back(j.get());
    return rows;
}

std::vector<MetricsReport> absorption_curve(const coupler::EvolutionResult& evolution) {
    std::vector<MetricsReport> curve;
    for (const auto& r : evolution.log.records)
        if (r.cycle == 0 && r.decision.h == 1 && r.eval) curve.push_back(*r.eval);
    return curve;
}

ZeroShotResult run_zero_shot(const ExperimentConfig& config, const Dataset& data) {
    if (std::none_of(data.groups.begin(), data.groups.end(), [](const DomainGroup& g) { return !g.holdout.empty(); }))
        throw Error(kPhase, "zero-shot needs a held-out temporal period (temporal.periods_per_day >= 2)");
    auto full_cfg = config;
    if (full_cfg.variant == Variant::IL) full_cfg.variant = Variant::full;
    const auto run = run_full(full_cfg, data, false);
    const auto& evo = *run.evolution;

    ZeroShotResult z;
    std::vector<MetricsReport> served;
    for (const auto& g : data.groups)
        if (!g.holdout.empty()) served.push_back(evaluate(evo.state.model_for(g.group_id), g.holdout, data.graph));
    z.synevo = pool(served);

    const auto evolve_cfg = evolve_config_for(config, static_cast<std::size_t>(data.graph.node_count));
    const auto& source = data.groups.front();
    z.baseline_source = source.group_id;
    z.baseline_epochs = config.baseline_epochs ? config.baseline_epochs : container_epochs(evo.log);
    const auto seed = derive_seed(config.seed, 20);
    auto baseline = ModelParams::random(evolve_cfg.probe.arch, seed);
    train_plain(baseline, source, data.graph, evolve_cfg, z.baseline_epochs, seed);
    z.baseline = *holdout_metrics(baseline, data);

    const double improvement = z.baseline.mae > 0.0 ? (z.baseline.mae - z.synevo.mae) / z.baseline.mae : 0.0;
    z.report = {{"seed", config.seed},
                {"synevo", to_json(z.synevo)},
                {"baseline", to_json(z.baseline)},
                {"baseline_source", z.baseline_source},
                {"baseline_epochs", z.baseline_epochs},
                {"relative_mae_improvement", improvement},
                {"absorbed", evo.state.container.absorbed_ids()}};
    return z;
}

std::string sweep_csv(const std::vector<SweepCell>& cells) {
    std::ostringstream out;
    out << "cell,p0,lambda0,kappa,status,test_mae,test_rmse,holdout_mae,holdout_rmse,absorbed,gate_open,error\n";
    for (const auto& c : cells) {
        auto field = [](const std::optional<MetricsReport>& m, bool rmse) {
            return m ? number(rmse ? m->rmse : m->mae) : std::string{};
        };
        std::string err = c.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << c.index << ',' << number(c.p0) << ',' << number(c.lambda0) << ',' << number(c.kappa) << ','
            << (c.ok ? "ok" : "failed") << ',' << field(c.test, false) << ',' << field(c.test, true) << ','
            << field(c.holdout, false) << ',' << field(c.holdout, true) << ',' << c.absorbed << ',' << c.gate_open
            << ',' << err << '\n';
    }
    return out.str();
}

std::vector<SweepCell> sweep(const ExperimentConfig& config, const Dataset& data, bool write_artifacts) {
    const auto& g = config.sweep;
    if (g.p0.empty() || g.lambda0.empty() || g.kappa.empty()) throw Error(kPhase, "sweep grids must be nonempty");
    std::vector<SweepCell> cells;
    for (double p0 : g.p0)
        for (double l0 : g.lambda0)
            for (double k : g.kappa) {
                SweepCell c;
                c.index = cells.size();
                c.p0 = p0;
                c.lambda0 = l0;
                c.kappa = k;
                cells.push_back(c);
            }

    auto run_cell = [&](SweepCell& cell) {
        try {
            auto cfg = config;
            cfg.evolve.p0 = cell.p0;
            cfg.evolve.lambda0 = cell.lambda0;
            cfg.evolve.kappa = cell.kappa;
            cfg.output_dir = config.output_dir / cell_name(cell.index);
            cfg.validate();
            const auto run = run_full(cfg, data, false);
            cell.test = run.evaluation.test;
            cell.holdout = run.evaluation.holdout;
            if (run.evolution) {
                cell.absorbed = run.evolution->state.container.absorbed_ids().size();
                for (const auto& r : run.evolution->log.records)
                    if (r.cycle == 0 && !r.bootstrap && r.decision.h == 1) ++cell.gate_open;
            }
            cell.ok = true;
            if (write_artifacts) write_text(cfg.output_dir / "report.json", run.report.dump(2) + "\n");
        } catch (const std::exception& e) {
            cell.ok = false;
            cell.error = e.what();
        }
    };

    std::size_t workers = config.parallel_cells ? config.parallel_cells : std::thread::hardware_concurrency();
    workers = std::max<std::size_t>(1, std::min(workers, cells.size()));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool_threads;
    for (std::size_t w = 0; w < workers; ++w)
        pool_threads.emplace_back([&] {
            for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(cells[i]);
        });
    for (auto& t : pool_threads) t.join();

    if (write_artifacts) write_text(config.output_dir / "sweep.csv", sweep_csv(cells));
    return cells;
}

} // namespace synevo::experiments
