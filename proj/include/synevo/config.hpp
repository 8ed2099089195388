#pragma once

// Experiment configuration: a JSON tree read from --config, with every field
// optional and defaulted. The root seed fans out to the data, probe,
// container and extractor seeds.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "synevo/coupler.hpp"
#include "synevo/datagen.hpp"
#include "synevo/info_audit.hpp"

namespace synevo {

enum class Variant { full, REO, Ela, PE, H2E, IL, DER };

Variant variant_from_string(const std::string& name);
std::string to_string(Variant variant);

struct DatasetSpec {
    enum class Kind { synthetic, csv };
    Kind kind = Kind::synthetic;
    datagen::SyntheticConfig synthetic;
    std::vector<std::filesystem::path> csv_paths;
    datagen::CsvFormat csv_format = datagen::CsvFormat::wide_format;
    std::filesystem::path adjacency_path;  // csv only; empty means a ring over the nodes
};

struct SweepGrid {
    std::vector<double> p0 = {0.1, 0.3, 0.5, 0.7, 1.0};
    std::vector<double> lambda0 = {0.01, 0.03, 0.05, 0.07, 0.1};
    std::vector<double> kappa = {1e3, 1e4, 1e5, 1e6};
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "synevo_out";
    Variant variant = Variant::full;
    DatasetSpec dataset;
    datagen::GroupLayout layout;
    std::size_t hidden1 = 32;
    std::size_t hidden2 = 32;
    coupler::EvolveConfig evolve;
    /// Epochs of the single-domain zero-shot baseline; 0 matches the
    /// container's total training epochs.
    std::size_t baseline_epochs = 0;
    audit::HistogramEstimator estimator;
    double ib_beta = 1.0;
    SweepGrid sweep;
    std::size_t parallel_cells = 0;  // 0: hardware concurrency

    void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// The evolve settings the variant switches on, with seeds derived from the
/// root seed and the architecture sized for `nodes`.
coupler::EvolveConfig evolve_config_for(const ExperimentConfig& config, std::size_t nodes);

} // namespace synevo
