#include "synevo/metrics.hpp"

#include <cmath>

#include "synevo/error.hpp"

namespace synevo {

namespace {
constexpr const char* kPhase = "metrics";
constexpr double kMapeFloor = 1e-8;
} // namespace

MetricsReport metrics(std::span<const double> pred, std::span<const double> target, std::span<const double> mask) {
    if (pred.size() != target.size() || pred.size() != mask.size())
        throw ShapeError(kPhase, "prediction, target and mask sizes differ");
    double abs_sum = 0.0, sq_sum = 0.0, weight = 0.0;
    double ape_sum = 0.0, ape_weight = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - target[i];
        abs_sum += std::abs(e) * mask[i];
        sq_sum += e * e * mask[i];
        weight += mask[i];
        if (mask[i] != 0.0 && std::abs(target[i]) > kMapeFloor) {
            ape_sum += std::abs(e) / std::abs(target[i]) * mask[i];
            ape_weight += mask[i];
        }
    }
    if (!(weight > 0.0)) throw Error(kPhase, "mask selects no entries");
    MetricsReport r;
    r.mae = abs_sum / weight;
    r.rmse = std::sqrt(sq_sum / weight);
    if (ape_weight > 0.0) r.mape = ape_sum / ape_weight;
    r.count = static_cast<std::size_t>(weight);
    return r;
}

MetricsReport evaluate(const ModelParams& params, const WindowBatch& batch, const GraphSpec& graph) {
    if (batch.empty()) throw Error(kPhase, "evaluation set is empty");
    const auto pred = forward(params, batch, graph);
    return metrics(pred, batch.targets, batch.mask);
}

MetricsReport pool(std::span<const MetricsReport> reports) {
    if (reports.empty()) throw Error(kPhase, "nothing to pool");
    double n = 0.0, abs_sum = 0.0, sq_sum = 0.0;
    double ape_n = 0.0, ape_sum = 0.0;
    for (const auto& r : reports) {
        const double c = static_cast<double>(r.count);
        n += c;
        abs_sum += r.mae * c;
        sq_sum += r.rmse * r.rmse * c;
        if (r.mape) {
            ape_n += c;
            ape_sum += *r.mape * c;
        }
    }
    MetricsReport out;
    out.count = static_cast<std::size_t>(n);
    out.mae = abs_sum / n;
    out.rmse = std::sqrt(sq_sum / n);
    if (ape_n > 0.0) out.mape = ape_sum / ape_n;
    return out;
}

nlohmann::json to_json(const MetricsReport& m) {
    return {{"mae", m.mae},
            {"rmse", m.rmse},
            {"mape", m.mape ? nlohmann::json(*m.mape) : nlohmann::json("undefined")},
            {"count", m.count}};
}

} // namespace synevo
