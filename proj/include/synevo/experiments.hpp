#pragma once

// Experiment runners behind the CLI. Each is a pure function of the config:
// the same config and seed give the same numbers and the same files.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "synevo/config.hpp"
#include "synevo/coupler.hpp"
#include "synevo/info_audit.hpp"
#include "synevo/metrics.hpp"

namespace synevo::experiments {

struct Dataset {
    GraphSpec graph;
    std::vector<DomainGroup> groups;
};

Dataset load_dataset(const ExperimentConfig& config);

struct GroupEval {
    std::string group_id;
    std::string served_by;  // "container", "isolated"
    std::optional<MetricsReport> test;
    std::optional<MetricsReport> holdout;
};

/// Test and held-out-period metrics of every group under the model that
/// serves it. The aggregate MAE/RMSE are unweighted means over groups.
struct Evaluation {
    std::vector<GroupEval> groups;
    std::optional<MetricsReport> test;
    std::optional<MetricsReport> holdout;
};

Evaluation evaluate_served(const Dataset& data, const std::function<const ModelParams&(const std::string&)>& model_for);

/// Metrics of one model on the held-out windows of every group, pooled.
std::optional<MetricsReport> holdout_metrics(const ModelParams& model, const Dataset& data);

struct RunResult {
    Variant variant = Variant::full;
    std::optional<coupler::EvolutionResult> evolution;  // absent for IL
    std::map<std::string, ModelParams> independent;     // IL models
    std::map<std::string, std::vector<double>> independent_traces;
    Evaluation evaluation;
    nlohmann::json report;
};

/// Runs the configured variant end to end. With `write_artifacts` the
/// report, loss traces, evolution log, entropy audit and checkpoints land in
/// config.output_dir.
RunResult run_full(const ExperimentConfig& config, const Dataset& data, bool write_artifacts = true);
RunResult run_full(const ExperimentConfig& config, bool write_artifacts = true);

/// run_full for a non-full variant, without artifacts unless asked.
RunResult run_ablation(const ExperimentConfig& config, const Dataset& data, bool write_artifacts = false);

struct AblationRow {
    Variant variant;
    Evaluation evaluation;
    std::string error;  // non-empty when the variant failed
};

/// full plus each listed variant on the same data, in parallel.
std::vector<AblationRow> ablation_suite(const ExperimentConfig& config, const Dataset& data,
                                        const std::vector<Variant>& variants);

struct ZeroShotResult {
    MetricsReport synevo;
    MetricsReport baseline;
    std::string baseline_source;
    std::size_t baseline_epochs = 0;
    nlohmann::json report;
};

/// Evolved models versus a backbone trained on one source domain with the
/// same epoch budget, both scored on the held-out period they never saw.
ZeroShotResult run_zero_shot(const ExperimentConfig& config, const Dataset& data);

/// Container held-out metrics after each absorption of the first cycle.
std::vector<MetricsReport> absorption_curve(const coupler::EvolutionResult& evolution);

struct SweepCell {
    std::size_t index = 0;
    double p0 = 0.0;
    double lambda0 = 0.0;
    double kappa = 0.0;
    bool ok = false;
    std::string error;
    std::optional<MetricsReport> test;
    std::optional<MetricsReport> holdout;
    std::size_t absorbed = 0;
    std::size_t gate_open = 0;  // h = 1 among gated groups
};

/// Cartesian p0 × λ0 × κ grid, one seeded run per cell. Failed cells are
/// recorded and the sweep continues. Writes sweep.csv and per-cell reports
/// when `write_artifacts`.
std::vector<SweepCell> sweep(const ExperimentConfig& config, const Dataset& data, bool write_artifacts = true);
std::string sweep_csv(const std::vector<SweepCell>& cells);

/// Entropy audit of the dataset's pooled summaries; the IB value is filled
/// in when a model is supplied.
audit::EntropyReport audit_dataset(const ExperimentConfig& config, const Dataset& data,
                                   const ModelParams* model = nullptr);

/// epoch,group_id,cycle,loss rows of every training trace in the log.
std::string losses_csv(const coupler::EvolutionLog& log);

} // namespace synevo::experiments
