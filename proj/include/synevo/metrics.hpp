#pragma once

#include <optional>
#include <span>

#include "json.hpp"
#include "synevo/backbone.hpp"

namespace synevo {

struct MetricsReport {
    double mae = 0.0;
    double rmse = 0.0;
    std::optional<double> mape;  // empty when no observed target is nonzero
    std::size_t count = 0;       // masked-in entries
};

/// MAE and RMSE over mask; MAPE over mask ∧ |target| > 1e-8.
MetricsReport metrics(std::span<const double> pred, std::span<const double> target, std::span<const double> mask);

/// Metrics of `params` on every window of `batch`.
MetricsReport evaluate(const ModelParams& params, const WindowBatch& batch, const GraphSpec& graph);

/// Entry-weighted pooling of several reports.
MetricsReport pool(std::span<const MetricsReport> reports);

nlohmann::json to_json(const MetricsReport& m);

} // namespace synevo
