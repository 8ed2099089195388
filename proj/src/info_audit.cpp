#include "synevo/info_audit.hpp"

#include <algorithm>
#include <cmath>

#include "synevo/error.hpp"

namespace synevo::audit {

namespace {

constexpr const char* kPhase = "audit";

void check_samples(std::span<const double> samples, const HistogramEstimator& est) {
    if (est.bins < 2) throw Error(kPhase, "histogram needs at least 2 bins");
    if (samples.empty()) throw Error(kPhase, "no samples");
    if (samples.size() < est.bins)
        throw Error(kPhase, "need at least " + std::to_string(est.bins) + " samples, got " + std::to_string(samples.size()));
}

// −Σ p log p over nonzero counts, summed in ascending count order so the
// value depends only on the multiset of counts.
double entropy_from_counts(std::vector<std::size_t> counts, std::size_t total) {
    counts.erase(std::remove(counts.begin(), counts.end(), std::size_t{0}), counts.end());
    std::sort(counts.begin(), counts.end());
    const double n = static_cast<double>(total);
    double h = 0.0;
    for (std::size_t c : counts) {
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return h;
}

} // namespace

Binning binning_from_string(const std::string& name) {
    if (name == "equal-frequency" || name == "equal_frequency") return Binning::equal_frequency;
    if (name == "equal-width" || name == "equal_width") return Binning::equal_width;
    throw Error(kPhase, "unknown binning '" + name + "'");
}

std::string to_string(Binning binning) {
    return binning == Binning::equal_frequency ? "equal-frequency" : "equal-width";
}

std::vector<std::size_t> assign_bins(std::span<const double> samples, const HistogramEstimator& est) {
    check_samples(samples, est);
    std::vector<std::size_t> bins(samples.size());
    if (est.binning == Binning::equal_width) {
        const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
        const double width = *hi - *lo;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (width <= 0.0) {
                bins[i] = 0;
                continue;
            }
            const auto b = static_cast<std::size_t>((samples[i] - *lo) / width * static_cast<double>(est.bins));
            bins[i] = std::min(b, est.bins - 1);
        }
        return bins;
    }
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> edges(est.bins - 1);
    for (std::size_t b = 1; b < est.bins; ++b) edges[b - 1] = sorted[b * sorted.size() / est.bins];
    for (std::size_t i = 0; i < samples.size(); ++i)
        bins[i] = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), samples[i]) - edges.begin());
    return bins;
}

double entropy(std::span<const double> samples, const HistogramEstimator& est) {
    std::vector<std::size_t> counts(est.bins, 0);
    for (std::size_t b : assign_bins(samples, est)) ++counts[b];
    return entropy_from_counts(std::move(counts), samples.size());
}

double joint_entropy(std::span<const double> x, std::span<const double> y, const HistogramEstimator& est) {
    if (x.size() != y.size()) throw ShapeError(kPhase, "joint entropy: sample counts differ");
    const auto bx = assign_bins(x, est);
    const auto by = assign_bins(y, est);
    std::vector<std::size_t> counts(est.bins * est.bins, 0);
    for (std::size_t i = 0; i < bx.size(); ++i) ++counts[bx[i] * est.bins + by[i]];
    return entropy_from_counts(std::move(counts), x.size());
}

double mutual_information(std::span<const double> x, std::span<const double> y, const HistogramEstimator& est) {
    if (x.size() != y.size()) throw ShapeError(kPhase, "mutual information: sample counts differ");
    const double mi = (entropy(x, est) + entropy(y, est)) - joint_entropy(x, y, est);
    return std::max(0.0, mi);
}

double conditional_entropy(std::span<const double> x, std::span<const double> given, const HistogramEstimator& est) {
    return entropy(x, est) - mutual_information(x, given, est);
}

std::vector<double> first_principal_projection(std::span<const std::vector<double>> columns) {
    if (columns.empty()) throw Error(kPhase, "principal projection of no columns");
    const std::size_t n = columns.front().size();
    const auto k = static_cast<Eigen::Index>(columns.size());
    Eigen::MatrixXd z(static_cast<Eigen::Index>(n), k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const auto& col = columns[static_cast<std::size_t>(j)];
        if (col.size() != n) throw ShapeError(kPhase, "principal projection: columns differ in length");
        const Eigen::Map<const Eigen::VectorXd> v(col.data(), static_cast<Eigen::Index>(n));
        const double mu = v.mean();
        const double sd = std::sqrt((v.array() - mu).square().mean());
        z.col(j) = (v.array() - mu) / (sd > 0.0 ? sd : 1.0);
    }
    Eigen::VectorXd axis = Eigen::VectorXd::Ones(1);
    if (k > 1) {
        const Eigen::MatrixXd cov = (z.transpose() * z) / static_cast<double>(n);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
        axis = solver.eigenvectors().col(k - 1);
        if (axis.sum() < 0.0) axis = -axis;
    }
    const Eigen::VectorXd proj = z * axis;
    return {proj.data(), proj.data() + proj.size()};
}

std::vector<double> conditional_entropy_chain(std::span<const std::vector<double>> domains,
                                              const HistogramEstimator& est) {
    if (domains.size() < 2) throw Error(kPhase, "conditional entropy chain needs at least 2 domains");
    std::vector<double> chain{entropy(domains[0], est)};
    for (std::size_t i = 1; i < domains.size(); ++i) {
        const auto prior = first_principal_projection(domains.subspan(0, i));
        chain.push_back(conditional_entropy(domains[i], prior, est));
    }
    return chain;
}

double ib_objective(double i_xz, double i_zy, double beta) {
    if (!(i_xz >= 0.0) || !(i_zy >= 0.0)) throw Error(kPhase, "ib_objective: information terms must be nonnegative");
    if (!(beta > 0.0)) throw Error(kPhase, "ib_objective: beta must be positive");
    return i_xz - beta * i_zy;
}

std::vector<double> pooled_summary(const Matrix& series) {
    const Eigen::VectorXd m = series.rowwise().mean();
    return {m.data(), m.data() + m.size()};
}

EntropyReport entropy_report(std::span<const std::string> ids, std::span<const std::vector<double>> summaries,
                             const HistogramEstimator& est) {
    if (ids.size() != summaries.size()) throw ShapeError(kPhase, "entropy report: ids and summaries differ in count");
    EntropyReport r;
    r.estimator = est;
    r.domain_ids.assign(ids.begin(), ids.end());
    for (const auto& s : summaries) r.entropies.push_back(entropy(s, est));
    r.pairwise_mi.assign(summaries.size(), std::vector<double>(summaries.size(), 0.0));
    for (std::size_t i = 0; i < summaries.size(); ++i)
        for (std::size_t j = i; j < summaries.size(); ++j) {
            const double mi = mutual_information(summaries[i], summaries[j], est);
            r.pairwise_mi[i][j] = mi;
            r.pairwise_mi[j][i] = mi;
        }
    if (summaries.size() >= 2) r.chain = conditional_entropy_chain(summaries, est);
    return r;
}

nlohmann::json to_json(const EntropyReport& report) {
    nlohmann::json j{{"bins", report.estimator.bins},
                     {"binning", to_string(report.estimator.binning)},
                     {"domains", report.domain_ids},
                     {"entropy", report.entropies},
                     {"mutual_information", report.pairwise_mi},
                     {"conditional_chain", report.chain}};
    if (report.has_ib)
        j["information_bottleneck"] = {
            {"i_xz", report.i_xz}, {"i_zy", report.i_zy}, {"beta", report.beta}, {"value", report.ib_value}};
    return j;
}

} // namespace synevo::audit
