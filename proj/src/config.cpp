#include "synevo/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "synevo/error.hpp"
#include "synevo/seed.hpp"

namespace synevo {

namespace {

constexpr const char* kPhase = "config";

using nlohmann::json;

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw Error(kPhase, "'" + section + "' must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items())
        if (!ok.contains(key)) throw Error(kPhase, "unknown key '" + key + "' in " + section);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) {
        try {
            out = it->get<T>();
        } catch (const json::exception& e) {
            throw Error(kPhase, std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

json section(const json& root, const char* name) {
    if (auto it = root.find(name); it != root.end()) return *it;
    return json::object();
}

std::string csv_format_name(datagen::CsvFormat f) { return f == datagen::CsvFormat::long_format ? "long" : "wide"; }

datagen::CsvFormat csv_format_from(const std::string& s) {
    if (s == "long") return datagen::CsvFormat::long_format;
    if (s == "wide") return datagen::CsvFormat::wide_format;
    throw Error(kPhase, "csv_format must be 'long' or 'wide', got '" + s + "'");
}

} // namespace

Variant variant_from_string(const std::string& name) {
    static const std::pair<const char*, Variant> table[] = {{"full", Variant::full}, {"REO", Variant::REO},
                                                            {"Ela", Variant::Ela},   {"PE", Variant::PE},
                                                            {"H2E", Variant::H2E},   {"IL", Variant::IL},
                                                            {"DER", Variant::DER}};
    for (const auto& [n, v] : table)
        if (name == n) return v;
    throw Error(kPhase, "unknown variant '" + name + "' (expected full, REO, Ela, PE, H2E, IL or DER)");
}

std::string to_string(Variant variant) {
    switch (variant) {
        case Variant::full: return "full";
        case Variant::REO: return "REO";
        case Variant::Ela: return "Ela";
        case Variant::PE: return "PE";
        case Variant::H2E: return "H2E";
        case Variant::IL: return "IL";
        case Variant::DER: return "DER";
    }
    return "full";
}

void ExperimentConfig::validate() const {
    const auto& e = evolve;
    if (!(e.p0 > 0.0 && e.p0 <= 1.0)) throw Error(kPhase, "p0 must lie in (0, 1]");
    if (!(e.lambda0 > 0.0 && e.lambda0 < 1.0)) throw Error(kPhase, "lambda0 must lie in (0, 1)");
    if (!(e.kappa > 0.0)) throw Error(kPhase, "kappa must be positive");
    if (!(e.margin > 0.0)) throw Error(kPhase, "margin must be positive");
    if (!(e.fixed_p >= 0.0 && e.fixed_p < 1.0)) throw Error(kPhase, "fixed_p must lie in [0, 1)");
    if (e.embed_dim == 0) throw Error(kPhase, "embed_dim must be positive");
    if (e.cycles == 0) throw Error(kPhase, "cycles must be at least 1");
    if (e.training.epochs == 0) throw Error(kPhase, "container epochs must be positive");
    if (layout.t_in == 0 || layout.t_out == 0) throw Error(kPhase, "t_in and t_out must be positive");
    if (hidden1 == 0 || hidden2 == 0) throw Error(kPhase, "hidden sizes must be positive");
    const double ratio_sum = layout.ratios.train + layout.ratios.val + layout.ratios.test;
    if (layout.ratios.train <= 0.0 || layout.ratios.val < 0.0 || layout.ratios.test <= 0.0 ||
        std::abs(ratio_sum - 1.0) > 1e-9)
        throw Error(kPhase, "split ratios must be positive and sum to 1");
    if (estimator.bins < 2) throw Error(kPhase, "audit bins must be at least 2");
    if (!(ib_beta > 0.0)) throw Error(kPhase, "ib_beta must be positive");
    if (dataset.kind == DatasetSpec::Kind::synthetic) {
        try {
            dataset.synthetic.validate();
        } catch (const Error& err) {
            throw Error(kPhase, err.what());
        }
    } else if (dataset.csv_paths.empty()) {
        throw Error(kPhase, "csv dataset needs at least one path");
    }
}

ExperimentConfig config_from_json(const json& root) {
    check_keys(root, "config",
               {"seed", "output_dir", "variant", "dataset", "window", "temporal", "backbone", "probe", "container",
                "coupler", "extractor", "baseline", "audit", "sweep"});
    ExperimentConfig c;
    read(root, "seed", c.seed);
    std::string out = c.output_dir.string();
    read(root, "output_dir", out);
    c.output_dir = out;
    if (root.contains("variant")) c.variant = variant_from_string(root.at("variant").get<std::string>());

    const auto ds = section(root, "dataset");
    check_keys(ds, "dataset",
               {"kind", "nodes", "timesteps", "domains", "rho", "sigma", "graph", "steps_per_day", "alpha", "latent_noise",
                "domain_rhos", "domain_sigmas", "csv_paths", "csv_format", "adjacency"});
    auto& syn = c.dataset.synthetic;
    std::string kind = "synthetic";
    read(ds, "kind", kind);
    if (kind == "synthetic") c.dataset.kind = DatasetSpec::Kind::synthetic;
    else if (kind == "csv") c.dataset.kind = DatasetSpec::Kind::csv;
    else throw Error(kPhase, "dataset.kind must be 'synthetic' or 'csv'");
    read(ds, "nodes", syn.node_count);
    read(ds, "timesteps", syn.timesteps);
    read(ds, "domains", syn.domain_count);
    read(ds, "rho", syn.rho);
    read(ds, "sigma", syn.sigma);
    if (ds.contains("graph")) syn.graph = datagen::graph_model_from_string(ds.at("graph").get<std::string>());
    read(ds, "steps_per_day", syn.steps_per_day);
    read(ds, "alpha", syn.alpha);
    read(ds, "latent_noise", syn.latent_noise);
    read(ds, "domain_rhos", syn.domain_rhos);
    read(ds, "domain_sigmas", syn.domain_sigmas);
    std::vector<std::string> paths;
    read(ds, "csv_paths", paths);
    for (auto& p : paths) c.dataset.csv_paths.emplace_back(p);
    if (ds.contains("csv_format")) c.dataset.csv_format = csv_format_from(ds.at("csv_format").get<std::string>());
    std::string adjacency;
    read(ds, "adjacency", adjacency);
    c.dataset.adjacency_path = adjacency;

    const auto win = section(root, "window");
    check_keys(win, "window", {"t_in", "t_out", "train", "val", "test"});
    read(win, "t_in", c.layout.t_in);
    read(win, "t_out", c.layout.t_out);
    read(win, "train", c.layout.ratios.train);
    read(win, "val", c.layout.ratios.val);
    read(win, "test", c.layout.ratios.test);

    const auto tmp = section(root, "temporal");
    check_keys(tmp, "temporal", {"steps_per_day", "periods_per_day", "holdout_period", "holdout_lookback"});
    c.layout.steps_per_day = syn.steps_per_day;
    c.layout.periods_per_day = 4;
    read(tmp, "steps_per_day", c.layout.steps_per_day);
    read(tmp, "periods_per_day", c.layout.periods_per_day);
    read(tmp, "holdout_period", c.layout.holdout_period);
    read(tmp, "holdout_lookback", c.layout.holdout_lookback);

    const auto bb = section(root, "backbone");
    check_keys(bb, "backbone", {"hidden1", "hidden2"});
    read(bb, "hidden1", c.hidden1);
    read(bb, "hidden2", c.hidden2);

    auto& e = c.evolve;
    const auto pr = section(root, "probe");
    check_keys(pr, "probe", {"learning_rate", "weight_decay", "rel_tol", "patience", "max_epochs", "batch_size", "parallel"});
    read(pr, "learning_rate", e.probe.learning_rate);
    read(pr, "weight_decay", e.probe.weight_decay);
    read(pr, "rel_tol", e.probe.convergence.rel_tol);
    read(pr, "patience", e.probe.convergence.patience);
    read(pr, "max_epochs", e.probe.convergence.max_epochs);
    read(pr, "batch_size", e.probe.convergence.batch_size);
    read(pr, "parallel", e.probe.parallel);

    const auto ct = section(root, "container");
    check_keys(ct, "container",
               {"p0", "lambda0", "learning_rate", "epochs", "batch_size", "cycles", "fixed_p", "fixed_lambda"});
    read(ct, "p0", e.p0);
    read(ct, "lambda0", e.lambda0);
    read(ct, "learning_rate", e.learning_rate);
    read(ct, "epochs", e.training.epochs);
    read(ct, "batch_size", e.training.batch_size);
    read(ct, "cycles", e.cycles);
    read(ct, "fixed_p", e.fixed_p);
    read(ct, "fixed_lambda", e.fixed_lambda);

    const auto cp = section(root, "coupler");
    check_keys(cp, "coupler", {"kappa", "isolated_epochs"});
    read(cp, "kappa", e.kappa);
    read(cp, "isolated_epochs", e.isolated_epochs);

    const auto ex = section(root, "extractor");
    check_keys(ex, "extractor",
               {"embed_dim", "margin", "distance", "epochs", "adapt_epochs", "pairs_per_epoch", "learning_rate"});
    read(ex, "embed_dim", e.embed_dim);
    read(ex, "margin", e.margin);
    if (ex.contains("distance")) e.distance = personality::distance_kind_from_string(ex.at("distance").get<std::string>());
    read(ex, "epochs", e.extractor_epochs);
    read(ex, "adapt_epochs", e.adapt_epochs);
    read(ex, "pairs_per_epoch", e.pairs.pairs_per_epoch);
    read(ex, "learning_rate", e.pairs.learning_rate);

    const auto bl = section(root, "baseline");
    check_keys(bl, "baseline", {"epochs"});
    read(bl, "epochs", c.baseline_epochs);

    const auto au = section(root, "audit");
    check_keys(au, "audit", {"bins", "binning", "ib_beta"});
    read(au, "bins", c.estimator.bins);
    if (au.contains("binning")) c.estimator.binning = audit::binning_from_string(au.at("binning").get<std::string>());
    read(au, "ib_beta", c.ib_beta);

    const auto sw = section(root, "sweep");
    check_keys(sw, "sweep", {"p0", "lambda0", "kappa", "parallel"});
    read(sw, "p0", c.sweep.p0);
    read(sw, "lambda0", c.sweep.lambda0);
    read(sw, "kappa", c.sweep.kappa);
    read(sw, "parallel", c.parallel_cells);

    c.validate();
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    const auto& syn = c.dataset.synthetic;
    const auto& e = c.evolve;
    std::vector<std::string> paths;
    for (const auto& p : c.dataset.csv_paths) paths.push_back(p.string());
    json holdout = c.layout.holdout_period == std::numeric_limits<std::size_t>::max() ? json(nullptr)
                                                                                         : json(c.layout.holdout_period);
    return {{"seed", c.seed},
            {"output_dir", c.output_dir.string()},
            {"variant", to_string(c.variant)},
            {"dataset",
             {{"kind", c.dataset.kind == DatasetSpec::Kind::synthetic ? "synthetic" : "csv"},
              {"nodes", syn.node_count},
              {"timesteps", syn.timesteps},
              {"domains", syn.domain_count},
              {"rho", syn.rho},
              {"sigma", syn.sigma},
              {"graph", datagen::to_string(syn.graph)},
              {"steps_per_day", syn.steps_per_day},
              {"alpha", syn.alpha},
              {"latent_noise", syn.latent_noise},
              {"domain_rhos", syn.domain_rhos},
              {"domain_sigmas", syn.domain_sigmas},
              {"csv_paths", paths},
              {"csv_format", csv_format_name(c.dataset.csv_format)},
              {"adjacency", c.dataset.adjacency_path.string()}}},
            {"window",
             {{"t_in", c.layout.t_in},
              {"t_out", c.layout.t_out},
              {"train", c.layout.ratios.train},
              {"val", c.layout.ratios.val},
              {"test", c.layout.ratios.test}}},
            {"temporal",
             {{"steps_per_day", c.layout.steps_per_day},
              {"periods_per_day", c.layout.periods_per_day},
              {"holdout_period", holdout},
              {"holdout_lookback", c.layout.holdout_lookback}}},
            {"backbone", {{"hidden1", c.hidden1}, {"hidden2", c.hidden2}}},
            {"probe",
             {{"learning_rate", e.probe.learning_rate},
              {"weight_decay", e.probe.weight_decay},
              {"rel_tol", e.probe.convergence.rel_tol},
              {"patience", e.probe.convergence.patience},
              {"max_epochs", e.probe.convergence.max_epochs},
              {"batch_size", e.probe.convergence.batch_size},
              {"parallel", e.probe.parallel}}},
            {"container",
             {{"p0", e.p0},
              {"lambda0", e.lambda0},
              {"learning_rate", e.learning_rate},
              {"epochs", e.training.epochs},
              {"batch_size", e.training.batch_size},
              {"cycles", e.cycles},
              {"fixed_p", e.fixed_p},
              {"fixed_lambda", e.fixed_lambda}}},
            {"coupler", {{"kappa", e.kappa}, {"isolated_epochs", e.isolated_epochs}}},
            {"extractor",
             {{"embed_dim", e.embed_dim},
              {"margin", e.margin},
              {"distance", personality::to_string(e.distance)},
              {"epochs", e.extractor_epochs},
              {"adapt_epochs", e.adapt_epochs},
              {"pairs_per_epoch", e.pairs.pairs_per_epoch},
              {"learning_rate", e.pairs.learning_rate}}},
            {"baseline", {{"epochs", c.baseline_epochs}}},
            {"audit",
             {{"bins", c.estimator.bins}, {"binning", audit::to_string(c.estimator.binning)}, {"ib_beta", c.ib_beta}}},
            {"sweep",
             {{"p0", c.sweep.p0}, {"lambda0", c.sweep.lambda0}, {"kappa", c.sweep.kappa}, {"parallel", c.parallel_cells}}}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(kPhase, "cannot open " + path.string());
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& err) {
        throw Error(kPhase, path.string() + ": " + err.what());
    }
    return config_from_json(j);
}

coupler::EvolveConfig evolve_config_for(const ExperimentConfig& config, std::size_t nodes) {
    auto e = config.evolve;
    e.probe.arch.nodes = nodes;
    e.probe.arch.features = 1;
    e.probe.arch.t_in = config.layout.t_in;
    e.probe.arch.t_out = config.layout.t_out;
    e.probe.arch.hidden1 = config.hidden1;
    e.probe.arch.hidden2 = config.hidden2;
    e.probe.seed = derive_seed(config.seed, 10);
    e.probe.convergence.seed = derive_seed(config.seed, 11);
    e.seed = derive_seed(config.seed, 12);
    switch (config.variant) {
        case Variant::full:
        case Variant::IL: break;
        case Variant::REO: e.order = coupler::OrderMode::random; break;
        case Variant::Ela: e.schedule = coupler::ScheduleMode::fixed; break;
        case Variant::PE: e.gate = coupler::GateMode::always_absorb; break;
        case Variant::H2E: e.order = coupler::OrderMode::reverse; break;
        case Variant::DER: e.schedule = coupler::ScheduleMode::inverse_length; break;
    }
    return e;
}

} // namespace synevo
