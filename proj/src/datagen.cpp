#include "synevo/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "synevo/error.hpp"
#include "synevo/seed.hpp"
#include "synevo/serialize.hpp"

namespace synevo::datagen {

namespace {

constexpr const char* kPhase = "datagen";

std::string domain_id(std::size_t c) {
    std::ostringstream s;
    s << 'd' << (c < 10 ? "0" : "") << c;
    return s.str();
}

double mean_of(const Matrix& m) { return m.mean(); }

double std_of(const Matrix& m) {
    const double mu = m.mean();
    return std::sqrt((m.array() - mu).square().mean());
}

// Z_{t+1} = α·Â·Z_t + drive_t, recorded after a burn-in.
template <class Drive>
Matrix diffuse(const GraphSpec& graph, double alpha, std::size_t timesteps, std::size_t burn_in, Drive&& drive) {
    const auto n = static_cast<Eigen::Index>(graph.node_count);
    Matrix out(static_cast<Eigen::Index>(timesteps), n);
    Eigen::VectorXd state = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd next(n);
    const long long first = -static_cast<long long>(burn_in);
    for (long long t = first; t < static_cast<long long>(timesteps); ++t) {
        if (t >= 0) out.row(static_cast<Eigen::Index>(t)) = state.transpose();
        next.noalias() = alpha * (graph.normalized * state);
        drive(t, next);
        state.swap(next);
    }
    return out;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_double(const std::string& s, double& value) {
    if (s.empty()) return false;
    const char* begin = s.data();
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), value);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

bool is_missing(const std::string& s) { return s.empty() || s == "nan" || s == "NaN" || s == "NA" || s == "null"; }

// Negative: a before b; 0: equal; positive: a after b. Numeric when both parse.
int compare_timestamps(const std::string& a, const std::string& b) {
    double x = 0.0, y = 0.0;
    if (parse_double(a, x) && parse_double(b, y)) return x < y ? -1 : (x > y ? 1 : 0);
    return a.compare(b);
}

Error malformed(const std::filesystem::path& path, std::size_t line, const std::string& why) {
    return Error(kPhase, path.string() + ":" + std::to_string(line) + ": " + why);
}

std::string format_double(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

} // namespace

GraphModel graph_model_from_string(const std::string& name) {
    if (name == "ring") return GraphModel::ring;
    if (name == "stochastic-block" || name == "stochastic_block" || name == "sbm") return GraphModel::stochastic_block;
    if (name == "random-geometric" || name == "random_geometric") return GraphModel::random_geometric;
    throw Error(kPhase, "unknown graph model '" + name + "'");
}

std::string to_string(GraphModel model) {
    switch (model) {
        case GraphModel::ring: return "ring";
        case GraphModel::stochastic_block: return "stochastic-block";
        case GraphModel::random_geometric: return "random-geometric";
    }
    return "ring";
}

void SyntheticConfig::validate() const {
    if (node_count == 0) throw Error(kPhase, "node_count must be positive");
    if (timesteps == 0) throw Error(kPhase, "timesteps must be positive");
    if (domain_count == 0) throw Error(kPhase, "domain_count must be positive");
    if (steps_per_day == 0) throw Error(kPhase, "steps_per_day must be positive");
    if (!(rho >= 0.0 && rho <= 1.0)) throw Error(kPhase, "rho must lie in [0, 1]");
    if (!(sigma >= 0.0)) throw Error(kPhase, "sigma must be nonnegative");
    if (!domain_rhos.empty()) {
        if (domain_rhos.size() != domain_count) throw Error(kPhase, "domain_rhos must have domain_count entries");
        for (double r : domain_rhos)
            if (!(r >= 0.0 && r <= 1.0)) throw Error(kPhase, "domain_rhos entries must lie in [0, 1]");
    }
    if (!domain_sigmas.empty()) {
        if (domain_sigmas.size() != domain_count) throw Error(kPhase, "domain_sigmas must have domain_count entries");
        for (double s : domain_sigmas)
            if (!(s >= 0.0)) throw Error(kPhase, "domain_sigmas entries must be nonnegative");
    }
}

GraphSpec gen_graph(const SyntheticConfig& config) {
    if (config.node_count == 0) throw Error(kPhase, "gen_graph: node_count must be positive");
    const auto n = static_cast<Eigen::Index>(config.node_count);
    Matrix a = Matrix::Zero(n, n);
    std::mt19937_64 rng(derive_seed(config.seed, 0));
    auto link = [&](Eigen::Index i, Eigen::Index j) {
        if (i == j) return;
        a(i, j) = 1.0;
        a(j, i) = 1.0;
    };
    switch (config.graph) {
        case GraphModel::ring:
            for (Eigen::Index i = 0; i < n && n > 1; ++i) link(i, (i + 1) % n);
            break;
        case GraphModel::stochastic_block: {
            const Eigen::Index blocks = std::max<Eigen::Index>(2, n / 4);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = i + 1; j < n; ++j)
                    if (u(rng) < (i % blocks == j % blocks ? 0.7 : 0.05)) link(i, j);
            break;
        }
        case GraphModel::random_geometric: {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            std::vector<std::pair<double, double>> pts(config.node_count);
            for (auto& p : pts) p = {u(rng), u(rng)};
            const double radius = std::min(1.0, std::sqrt(4.0 / (std::numbers::pi * static_cast<double>(n))));
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = i + 1; j < n; ++j) {
                    const double dx = pts[i].first - pts[j].first;
                    const double dy = pts[i].second - pts[j].second;
                    if (std::hypot(dx, dy) < radius) link(i, j);
                }
            break;
        }
    }
    return GraphSpec::from_adjacency(std::move(a));
}

Matrix gen_latent(const SyntheticConfig& config, const GraphSpec& graph) {
    config.validate();
    std::mt19937_64 rng(derive_seed(config.seed, 1));
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::vector<double> phases(graph.node_count);
    for (auto& p : phases) p = phase(rng);
    const double omega = 2.0 * std::numbers::pi / static_cast<double>(config.steps_per_day);
    const std::size_t burn_in = std::max<std::size_t>(config.steps_per_day, 64);
    std::mt19937_64 noise_rng(derive_seed(config.seed, 2));
    std::normal_distribution<double> innovation(0.0, 1.0);
    return diffuse(graph, config.alpha, config.timesteps, burn_in, [&](long long t, Eigen::VectorXd& next) {
        for (Eigen::Index i = 0; i < next.size(); ++i) {
            next(i) += std::sin(omega * static_cast<double>(t + 1) + phases[static_cast<std::size_t>(i)]);
            if (config.latent_noise > 0.0) next(i) += config.latent_noise * innovation(noise_rng);
        }
    });
}

std::vector<DomainSeries> gen_series(const SyntheticConfig& config, const GraphSpec& graph) {
    config.validate();
    if (graph.node_count != config.node_count) throw ShapeError(kPhase, "graph does not match node_count");
    const Matrix latent = gen_latent(config, graph);
    const double latent_mean = mean_of(latent);
    const double latent_std = std_of(latent);
    const std::size_t burn_in = std::max<std::size_t>(config.steps_per_day, 64);

    std::vector<DomainSeries> out;
    for (std::size_t c = 0; c < config.domain_count; ++c) {
        std::mt19937_64 rng(derive_seed(config.seed, 100 + c));
        std::normal_distribution<double> normal(0.0, 1.0);

        // Private process: its own static spatial profile plus graph-diffused
        // innovations, rescaled to the latent's mean and spread.
        Eigen::RowVectorXd profile(static_cast<Eigen::Index>(config.node_count));
        for (Eigen::Index i = 0; i < profile.size(); ++i) profile(i) = normal(rng);
        Matrix priv = diffuse(graph, config.alpha, config.timesteps, burn_in, [&](long long, Eigen::VectorXd& next) {
            for (Eigen::Index i = 0; i < next.size(); ++i) next(i) += normal(rng);
        });
        priv.rowwise() += profile;
        const double priv_std = std_of(priv);
        priv = ((priv.array() - mean_of(priv)) * (priv_std > 0.0 ? latent_std / priv_std : 0.0) + latent_mean).matrix();

        std::uniform_real_distribution<double> scale(0.5, 2.0);
        std::uniform_real_distribution<double> offset(-1.0, 1.0);
        DomainSeries d;
        d.group_id = domain_id(c);
        d.rho = config.domain_rhos.empty() ? config.rho : config.domain_rhos[c];
        d.scale = scale(rng);
        d.offset = offset(rng);
        const double sigma = config.domain_sigmas.empty() ? config.sigma : config.domain_sigmas[c];
        d.series = (d.scale * (d.rho * latent + (1.0 - d.rho) * priv)).array() + d.offset;
        if (sigma > 0.0)
            for (Eigen::Index i = 0; i < d.series.size(); ++i) d.series.data()[i] += sigma * normal(rng);
        out.push_back(std::move(d));
    }
    return out;
}

WindowBatch make_windows(const Matrix& series, const Matrix& mask, std::size_t t_in, std::size_t t_out,
                         std::vector<std::size_t>* starts, std::size_t start_offset) {
    if (t_in == 0 || t_out == 0) throw Error(kPhase, "window lengths must be positive");
    if (mask.rows() != series.rows() || mask.cols() != series.cols()) throw ShapeError(kPhase, "mask shape differs from series");
    const auto T = static_cast<std::size_t>(series.rows());
    const auto N = static_cast<std::size_t>(series.cols());
    WindowBatch batch(t_in, t_out, N, 1);
    if (T < t_in + t_out) return batch;
    const std::size_t count = T - t_in - t_out + 1;
    batch.inputs.reserve(count * t_in * N);
    batch.targets.reserve(count * t_out * N);
    batch.mask.reserve(count * t_out * N);
    for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t t = 0; t < t_in; ++t)
            for (std::size_t n = 0; n < N; ++n) {
                const auto r = static_cast<Eigen::Index>(s + t);
                const auto c = static_cast<Eigen::Index>(n);
                batch.inputs.push_back(mask(r, c) != 0.0 ? series(r, c) : 0.0);
            }
        for (std::size_t t = 0; t < t_out; ++t)
            for (std::size_t n = 0; n < N; ++n) {
                const auto r = static_cast<Eigen::Index>(s + t_in + t);
                const auto c = static_cast<Eigen::Index>(n);
                const bool observed = mask(r, c) != 0.0;
                batch.targets.push_back(observed ? series(r, c) : 0.0);
                batch.mask.push_back(observed ? 1.0 : 0.0);
            }
        if (starts) starts->push_back(start_offset + s);
    }
    return batch;
}

namespace {

WindowSplits split_windows(const WindowBatch& all, const std::vector<std::size_t>& starts, const SplitRatios& ratios) {
    if (!(ratios.train >= 0 && ratios.val >= 0 && ratios.test >= 0) ||
        std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
        throw Error(kPhase, "split ratios must be nonnegative and sum to 1");
    const std::size_t w = all.size();
    const std::size_t n_train = std::min(w, static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(w))));
    const std::size_t n_val =
        std::min(w - n_train, static_cast<std::size_t>(std::llround(ratios.val * static_cast<double>(w))));
    WindowSplits out;
    std::vector<std::size_t> rows(w);
    for (std::size_t i = 0; i < w; ++i) rows[i] = i;
    auto part = [&](std::size_t begin, std::size_t end, WindowBatch& batch, std::vector<std::size_t>& s) {
        batch = all.select(std::span<const std::size_t>(rows.data() + begin, end - begin));
        s.assign(starts.begin() + static_cast<std::ptrdiff_t>(begin), starts.begin() + static_cast<std::ptrdiff_t>(end));
    };
    part(0, n_train, out.train, out.train_starts);
    part(n_train, n_train + n_val, out.val, out.val_starts);
    part(n_train + n_val, w, out.test, out.test_starts);
    return out;
}

} // namespace

WindowSplits window_and_split(const Matrix& series, const Matrix& mask, std::size_t t_in, std::size_t t_out,
                              const SplitRatios& ratios) {
    if (static_cast<std::size_t>(series.rows()) < t_in + t_out)
        throw Error(kPhase, "series of length " + std::to_string(series.rows()) + " is shorter than one window (" +
                                std::to_string(t_in + t_out) + ")");
    std::vector<std::size_t> starts;
    const auto all = make_windows(series, mask, t_in, t_out, &starts);
    return split_windows(all, starts, ratios);
}

WindowSplits window_and_split(const Matrix& series, std::size_t t_in, std::size_t t_out, const SplitRatios& ratios) {
    return window_and_split(series, Matrix::Ones(series.rows(), series.cols()), t_in, t_out, ratios);
}

TemporalSplit temporal_domain_split(const Matrix& series, std::size_t steps_per_day, std::size_t periods_per_day,
                                    std::size_t holdout_period) {
    if (periods_per_day < 2) throw Error(kPhase, "temporal split needs at least 2 periods per day");
    if (steps_per_day == 0 || steps_per_day % periods_per_day != 0)
        throw Error(kPhase, "steps_per_day (" + std::to_string(steps_per_day) + ") is not divisible by periods_per_day (" +
                                std::to_string(periods_per_day) + ")");
    if (holdout_period >= periods_per_day) throw Error(kPhase, "holdout_period out of range");
    const std::size_t period_len = steps_per_day / periods_per_day;
    const auto T = static_cast<std::size_t>(series.rows());

    TemporalSplit out;
    std::size_t t = 0;
    while (t < T) {
        const bool held = ((t % steps_per_day) / period_len) == holdout_period;
        std::size_t end = t + 1;
        while (end < T && (((end % steps_per_day) / period_len) == holdout_period) == held) ++end;
        (held ? out.holdout_segments : out.train_segments).push_back({t, end});
        t = end;
    }
    auto gather = [&](const std::vector<Segment>& segs) {
        std::size_t rows = 0;
        for (const auto& s : segs) rows += s.end - s.begin;
        Matrix m(static_cast<Eigen::Index>(rows), series.cols());
        std::size_t r = 0;
        for (const auto& s : segs) {
            const auto len = static_cast<Eigen::Index>(s.end - s.begin);
            m.middleRows(static_cast<Eigen::Index>(r), len) = series.middleRows(static_cast<Eigen::Index>(s.begin), len);
            r += s.end - s.begin;
        }
        return m;
    };
    out.train_series = gather(out.train_segments);
    out.holdout_series = gather(out.holdout_segments);
    return out;
}

void attach_windows(DomainGroup& group, const GroupLayout& layout) {
    if (group.series_mask.size() == 0) group.series_mask = Matrix::Ones(group.series.rows(), group.series.cols());
    if (layout.periods_per_day < 2) {
        auto splits = window_and_split(group.series, group.series_mask, layout.t_in, layout.t_out, layout.ratios);
        group.train = std::move(splits.train);
        group.val = std::move(splits.val);
        group.test = std::move(splits.test);
        group.holdout = WindowBatch(layout.t_in, layout.t_out, static_cast<std::size_t>(group.series.cols()), 1);
        return;
    }
    const std::size_t holdout =
        layout.holdout_period == std::numeric_limits<std::size_t>::max() ? layout.periods_per_day - 1 : layout.holdout_period;
    const auto split = temporal_domain_split(group.series, layout.steps_per_day, layout.periods_per_day, holdout);

    auto windows_of = [&](const std::vector<Segment>& segs, std::vector<std::size_t>& starts) {
        WindowBatch all(layout.t_in, layout.t_out, static_cast<std::size_t>(group.series.cols()), 1);
        for (const auto& s : segs) {
            const auto len = static_cast<Eigen::Index>(s.end - s.begin);
            const auto begin = static_cast<Eigen::Index>(s.begin);
            all.append_all(make_windows(group.series.middleRows(begin, len), group.series_mask.middleRows(begin, len),
                                        layout.t_in, layout.t_out, &starts, s.begin));
        }
        return all;
    };
    std::vector<std::size_t> train_starts, holdout_starts;
    const auto in_period = windows_of(split.train_segments, train_starts);
    if (in_period.empty())
        throw Error(kPhase, "group " + group.group_id + ": training periods are shorter than one window");
    auto splits = split_windows(in_period, train_starts, layout.ratios);
    group.train = std::move(splits.train);
    group.val = std::move(splits.val);
    group.test = std::move(splits.test);
    auto holdout_segments = split.holdout_segments;
    if (layout.holdout_lookback)
        for (auto& seg : holdout_segments) seg.begin = seg.begin > layout.t_in ? seg.begin - layout.t_in : 0;
    group.holdout = windows_of(holdout_segments, holdout_starts);
    if (group.holdout.empty())
        throw Error(kPhase, "group " + group.group_id + ": holdout period is shorter than one window");
}

std::vector<DomainGroup> gen_domains(const SyntheticConfig& config, const GraphSpec& graph, const GroupLayout& layout) {
    std::vector<DomainGroup> out;
    for (auto& d : gen_series(config, graph)) {
        DomainGroup g;
        g.group_id = d.group_id;
        g.source = "synthetic";
        g.series = std::move(d.series);
        g.series_mask = Matrix::Ones(g.series.rows(), g.series.cols());
        std::ostringstream prov;
        prov << "synthetic seed=" << config.seed << " rho=" << d.rho << " a=" << d.scale << " b=" << d.offset;
        g.provenance = prov.str();
        attach_windows(g, layout);
        out.push_back(std::move(g));
    }
    return out;
}

// ---------------------------------------------------------------- CSV

DomainGroup load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw Error(kPhase, "cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&](std::string& out) {
        while (std::getline(in, out)) {
            ++line_no;
            if (!out.empty() && out.back() == '\r') out.pop_back();
            if (!trim(out).empty()) return true;
        }
        return false;
    };
    if (!next_line(line)) throw malformed(path, line_no, "empty file");
    const auto header = split_csv_line(line);

    std::vector<std::string> timestamps;
    std::vector<std::string> nodes;
    std::map<std::pair<std::size_t, std::size_t>, double> cells;

    if (schema.format == CsvFormat::wide_format) {
        if (header.size() < 2) throw malformed(path, line_no, "wide header needs timestamp and at least one node column");
        nodes.assign(header.begin() + 1, header.end());
        while (next_line(line)) {
            const auto row = split_csv_line(line);
            if (row.size() != header.size())
                throw malformed(path, line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                                   std::to_string(row.size()));
            if (row[0].empty()) throw malformed(path, line_no, "missing timestamp");
            if (!timestamps.empty() && compare_timestamps(row[0], timestamps.back()) <= 0)
                throw malformed(path, line_no, "timestamps are not increasing");
            timestamps.push_back(row[0]);
            for (std::size_t j = 1; j < row.size(); ++j) {
                if (is_missing(row[j])) continue;
                double v = 0.0;
                if (!parse_double(row[j], v)) throw malformed(path, line_no, "bad value '" + row[j] + "'");
                cells[{timestamps.size() - 1, j - 1}] = v;
            }
        }
    } else {
        if (header.size() != 3) throw malformed(path, line_no, "long header must be timestamp,node_id,value");
        std::map<std::string, std::size_t> node_index;
        while (next_line(line)) {
            const auto row = split_csv_line(line);
            if (row.size() != 3) throw malformed(path, line_no, "expected 3 fields, got " + std::to_string(row.size()));
            if (row[0].empty() || row[1].empty()) throw malformed(path, line_no, "missing timestamp or node id");
            if (timestamps.empty() || compare_timestamps(row[0], timestamps.back()) != 0) {
                if (!timestamps.empty() && compare_timestamps(row[0], timestamps.back()) < 0)
                    throw malformed(path, line_no, "timestamps are not monotone");
                timestamps.push_back(row[0]);
            }
            auto [it, inserted] = node_index.try_emplace(row[1], nodes.size());
            if (inserted) nodes.push_back(row[1]);
            if (is_missing(row[2])) continue;
            double v = 0.0;
            if (!parse_double(row[2], v)) throw malformed(path, line_no, "bad value '" + row[2] + "'");
            if (!cells.try_emplace({timestamps.size() - 1, it->second}, v).second)
                throw malformed(path, line_no, "duplicate entry for node " + row[1]);
        }
    }
    if (timestamps.empty() || nodes.empty()) throw malformed(path, line_no, "no data rows");

    DomainGroup g;
    g.group_id = schema.group_id.empty() ? path.stem().string() : schema.group_id;
    g.source = "csv";
    g.provenance = path.string();
    const auto T = static_cast<Eigen::Index>(timestamps.size());
    const auto N = static_cast<Eigen::Index>(nodes.size());
    g.series = Matrix::Zero(T, N);
    g.series_mask = Matrix::Zero(T, N);
    for (const auto& [key, v] : cells) {
        g.series(static_cast<Eigen::Index>(key.first), static_cast<Eigen::Index>(key.second)) = v;
        g.series_mask(static_cast<Eigen::Index>(key.first), static_cast<Eigen::Index>(key.second)) = 1.0;
    }
    return g;
}

void export_csv(const std::filesystem::path& path, const DomainGroup& group, CsvFormat format) {
    const Matrix mask = group.series_mask.size() ? group.series_mask : Matrix::Ones(group.series.rows(), group.series.cols());
    std::ostringstream out;
    if (format == CsvFormat::wide_format) {
        out << "timestamp";
        for (Eigen::Index n = 0; n < group.series.cols(); ++n) out << ",n" << n;
        out << '\n';
        for (Eigen::Index t = 0; t < group.series.rows(); ++t) {
            out << t;
            for (Eigen::Index n = 0; n < group.series.cols(); ++n) {
                out << ',';
                if (mask(t, n) != 0.0) out << format_double(group.series(t, n));
            }
            out << '\n';
        }
    } else {
        out << "timestamp,node_id,value\n";
        for (Eigen::Index t = 0; t < group.series.rows(); ++t)
            for (Eigen::Index n = 0; n < group.series.cols(); ++n) {
                out << t << ",n" << n << ',';
                if (mask(t, n) != 0.0) out << format_double(group.series(t, n));
                out << '\n';
            }
    }
    write_file_atomic(path, out.str());
}

Matrix load_adjacency_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(kPhase, "cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        std::vector<double> row;
        for (const auto& cell : split_csv_line(line)) {
            double v = 0.0;
            if (!parse_double(cell, v)) throw malformed(path, line_no, "bad adjacency entry '" + cell + "'");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    Matrix a(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size()) throw ShapeError(kPhase, "adjacency matrix is not square");
        for (std::size_t j = 0; j < rows.size(); ++j)
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    if (a != a.transpose()) throw ShapeError(kPhase, path.string() + ": adjacency matrix is not symmetric");
    if ((a.array() < 0.0).any()) throw Error(kPhase, path.string() + ": adjacency has negative entries");
    return a;
}

void export_adjacency_csv(const std::filesystem::path& path, const Matrix& adjacency) {
    std::ostringstream out;
    for (Eigen::Index i = 0; i < adjacency.rows(); ++i) {
        for (Eigen::Index j = 0; j < adjacency.cols(); ++j) out << (j ? "," : "") << format_double(adjacency(i, j));
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

} // namespace synevo::datagen
