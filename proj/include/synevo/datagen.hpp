#pragma once

// Synthetic multi-domain spatiotemporal data with a tunable share of common
// structure, the chronological window splits, and CSV ingestion for real
// datasets.
//
// A shared latent S diffuses over the graph under a daily sinusoidal forcing,
//   S_{t+1} = α·Â·S_t + f_t,
// and every domain mixes it with its own private process:
//   X_c = a_c·(ρ·S + (1−ρ)·P_c) + b_c + σ·ε.

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "synevo/backbone.hpp"
#include "synevo/domain.hpp"

namespace synevo::datagen {

enum class GraphModel { ring, stochastic_block, random_geometric };

GraphModel graph_model_from_string(const std::string& name);
std::string to_string(GraphModel model);

struct SyntheticConfig {
    std::size_t node_count = 8;
    std::size_t timesteps = 2000;
    std::size_t domain_count = 3;
    double rho = 0.9;
    double sigma = 0.1;
    GraphModel graph = GraphModel::ring;
    std::uint64_t seed = 1;
    std::size_t steps_per_day = 96;
    double alpha = 0.6;
    /// Std of graph-diffused Gaussian innovations added to the latent's forcing.
    double latent_noise = 0.0;
    /// Per-domain commonality; overrides `rho` when non-empty (size must be domain_count).
    std::vector<double> domain_rhos;
    /// Observation noise per domain; overrides `sigma` when non-empty.
    std::vector<double> domain_sigmas;

    void validate() const;
};

/// Seeded symmetric 0/1 adjacency for the chosen graph model.
GraphSpec gen_graph(const SyntheticConfig& config);

struct DomainSeries {
    std::string group_id;
    Matrix series;  // T × N
    double scale = 1.0;   // a_c
    double offset = 0.0;  // b_c
    double rho = 0.0;
};

/// Raw series of every domain (no windows). group ids are "d00", "d01", ...
std::vector<DomainSeries> gen_series(const SyntheticConfig& config, const GraphSpec& graph);

/// The shared latent S alone, T × N.
Matrix gen_latent(const SyntheticConfig& config, const GraphSpec& graph);

struct SplitRatios {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

struct WindowSplits {
    WindowBatch train;
    WindowBatch val;
    WindowBatch test;
    std::vector<std::size_t> train_starts, val_starts, test_starts;  // window start rows
};

/// All stride-1 windows of a contiguous series, in chronological order.
WindowBatch make_windows(const Matrix& series, const Matrix& mask, std::size_t t_in, std::size_t t_out,
                         std::vector<std::size_t>* starts = nullptr, std::size_t start_offset = 0);

/// Stride-1 windows split chronologically by start index. Train and val get
/// round(ratio·W) windows, test the remainder.
WindowSplits window_and_split(const Matrix& series, const Matrix& mask, std::size_t t_in, std::size_t t_out,
                              const SplitRatios& ratios = {});
WindowSplits window_and_split(const Matrix& series, std::size_t t_in, std::size_t t_out,
                              const SplitRatios& ratios = {});

/// Contiguous run of rows [begin, end) of the original series.
struct Segment {
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct TemporalSplit {
    Matrix train_series;  // non-holdout periods, concatenated
    Matrix holdout_series;
    std::vector<Segment> train_segments;
    std::vector<Segment> holdout_segments;
};

/// Cuts every day into `periods_per_day` equal periods and separates period
/// `holdout_period` from the rest.
TemporalSplit temporal_domain_split(const Matrix& series, std::size_t steps_per_day, std::size_t periods_per_day,
                                    std::size_t holdout_period);

struct GroupLayout {
    std::size_t t_in = 12;
    std::size_t t_out = 12;
    SplitRatios ratios;
    std::size_t steps_per_day = 0;
    std::size_t periods_per_day = 0;  // < 2 disables the temporal holdout
    std::size_t holdout_period = std::numeric_limits<std::size_t>::max();  // default: last period
    /// Held-out windows may take their inputs from the steps just before the
    /// period; their targets always lie inside it.
    bool holdout_lookback = true;
};

/// Fills the train/val/test (and holdout) windows of a group from its series.
/// With a temporal holdout, windows never straddle period boundaries.
void attach_windows(DomainGroup& group, const GroupLayout& layout);

/// k windowed domain groups.
std::vector<DomainGroup> gen_domains(const SyntheticConfig& config, const GraphSpec& graph, const GroupLayout& layout);

enum class CsvFormat { long_format, wide_format };

struct CsvSchema {
    CsvFormat format = CsvFormat::wide_format;
    std::string group_id;  // defaults to the file stem
};

/// Dense T × N series with a missing-value mask. Long format has columns
/// timestamp,node_id,value; wide format has timestamp followed by one column
/// per node. Timestamps must be nondecreasing (long) or increasing (wide).
DomainGroup load_csv(const std::filesystem::path& path, const CsvSchema& schema);

void export_csv(const std::filesystem::path& path, const DomainGroup& group, CsvFormat format);

/// Symmetric adjacency from a headerless numeric CSV matrix.
Matrix load_adjacency_csv(const std::filesystem::path& path);
void export_adjacency_csv(const std::filesystem::path& path, const Matrix& adjacency);

} // namespace synevo::datagen
