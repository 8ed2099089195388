#pragma once

// Plug-in histogram estimates of entropy, mutual information and the
// conditional-entropy chain over a sequence of domains. Everything is in nats.

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "synevo/backbone.hpp"

namespace synevo::audit {

enum class Binning { equal_width, equal_frequency };

Binning binning_from_string(const std::string& name);
std::string to_string(Binning binning);

struct HistogramEstimator {
    std::size_t bins = 16;
    Binning binning = Binning::equal_frequency;
};

/// Bin index per sample, in [0, bins).
std::vector<std::size_t> assign_bins(std::span<const double> samples, const HistogramEstimator& est);

double entropy(std::span<const double> samples, const HistogramEstimator& est);
double joint_entropy(std::span<const double> x, std::span<const double> y, const HistogramEstimator& est);

/// H(x) + H(y) − H(x,y) on the product histogram, clamped at 0.
double mutual_information(std::span<const double> x, std::span<const double> y, const HistogramEstimator& est);

/// H(x) − I(x; y).
double conditional_entropy(std::span<const double> x, std::span<const double> given, const HistogramEstimator& est);

/// Projection of the columns (standardized) onto their first principal axis,
/// signed so the loadings sum to a nonnegative value.
std::vector<double> first_principal_projection(std::span<const std::vector<double>> columns);

/// [H(X_1), H(X_2 | X_1), H(X_3 | X_1, X_2), ...] with the conditioning set
/// condensed to its first principal projection.
std::vector<double> conditional_entropy_chain(std::span<const std::vector<double>> domains,
                                              const HistogramEstimator& est);

/// I(X;Z) − β·I(Z;Y).
double ib_objective(double i_xz, double i_zy, double beta);

/// Mean over nodes per timestep.
std::vector<double> pooled_summary(const Matrix& series);

struct EntropyReport {
    std::vector<std::string> domain_ids;
    std::vector<double> entropies;
    std::vector<std::vector<double>> pairwise_mi;
    std::vector<double> chain;
    bool has_ib = false;
    double i_xz = 0.0;
    double i_zy = 0.0;
    double beta = 1.0;
    double ib_value = 0.0;
    HistogramEstimator estimator;
};

EntropyReport entropy_report(std::span<const std::string> ids, std::span<const std::vector<double>> summaries,
                             const HistogramEstimator& est);
nlohmann::json to_json(const EntropyReport& report);

} // namespace synevo::audit
