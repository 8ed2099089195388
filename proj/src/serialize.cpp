#include "synevo/serialize.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include "synevo/error.hpp"

namespace synevo {

namespace {

constexpr const char* kPhase = "serialize";
constexpr std::array<char, 8> kMagic{'S', 'Y', 'N', 'E', 'V', 'O', 'P', '1'};

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error(kPhase, "truncated parameter file");
    return v;
}

} // namespace

nlohmann::json arch_to_json(const ArchConfig& arch) {
    return {{"nodes", arch.nodes},     {"features", arch.features}, {"t_in", arch.t_in},
            {"t_out", arch.t_out},     {"hidden1", arch.hidden1},   {"hidden2", arch.hidden2}};
}

ArchConfig arch_from_json(const nlohmann::json& j) {
    ArchConfig a;
    a.nodes = j.at("nodes").get<std::size_t>();
    a.features = j.value("features", std::size_t{1});
    a.t_in = j.at("t_in").get<std::size_t>();
    a.t_out = j.at("t_out").get<std::size_t>();
    a.hidden1 = j.at("hidden1").get<std::size_t>();
    a.hidden2 = j.at("hidden2").get<std::size_t>();
    return a;
}

nlohmann::json params_to_json(const ModelParams& params) {
    params.check();
    nlohmann::json layout = nlohmann::json::array();
    for (const auto& s : layer_layout(params.arch))
        layout.push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}, {"offset", s.offset}});
    return {{"arch", arch_to_json(params.arch)}, {"layout", layout}, {"values", params.values}};
}

ModelParams params_from_json(const nlohmann::json& j) {
    ModelParams p;
    p.arch = arch_from_json(j.at("arch"));
    p.values = j.at("values").get<std::vector<double>>();
    const auto expected = layer_layout(p.arch);
    const auto& layout = j.at("layout");
    if (layout.size() != expected.size()) throw ShapeError(kPhase, "layer layout header does not match architecture");
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (layout[i].at("name").get<std::string>() != expected[i].name ||
            layout[i].at("rows").get<std::size_t>() != expected[i].rows ||
            layout[i].at("cols").get<std::size_t>() != expected[i].cols)
            throw ShapeError(kPhase, "layer " + expected[i].name + " header does not match architecture");
    }
    p.check();
    return p;
}

void write_params_binary(std::ostream& out, const ModelParams& params) {
    params.check();
    out.write(kMagic.data(), kMagic.size());
    const auto& a = params.arch;
    for (std::uint64_t v : {a.nodes, a.features, a.t_in, a.t_out, a.hidden1, a.hidden2}) put_u64(out, v);
    const auto layout = layer_layout(a);
    put_u64(out, layout.size());
    for (const auto& s : layout) {
        put_u64(out, s.name.size());
        out.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
        put_u64(out, s.rows);
        put_u64(out, s.cols);
    }
    put_u64(out, params.values.size());
    out.write(reinterpret_cast<const char*>(params.values.data()),
              static_cast<std::streamsize>(params.values.size() * sizeof(double)));
    if (!out) throw Error(kPhase, "failed writing parameter stream");
}

ModelParams read_params_binary(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw Error(kPhase, "not a parameter file");
    ModelParams p;
    p.arch.nodes = get_u64(in);
    p.arch.features = get_u64(in);
    p.arch.t_in = get_u64(in);
    p.arch.t_out = get_u64(in);
    p.arch.hidden1 = get_u64(in);
    p.arch.hidden2 = get_u64(in);
    const auto expected = layer_layout(p.arch);
    if (get_u64(in) != expected.size()) throw ShapeError(kPhase, "layer count does not match architecture");
    for (const auto& s : expected) {
        std::string name(get_u64(in), '\0');
        if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) throw Error(kPhase, "truncated parameter file");
        const auto rows = get_u64(in);
        const auto cols = get_u64(in);
        if (name != s.name || rows != s.rows || cols != s.cols)
            throw ShapeError(kPhase, "layer " + s.name + " header does not match architecture");
    }
    p.values.resize(get_u64(in));
    if (!in.read(reinterpret_cast<char*>(p.values.data()), static_cast<std::streamsize>(p.values.size() * sizeof(double))))
        throw Error(kPhase, "truncated parameter file");
    p.check();
    return p;
}

void save_params(const std::filesystem::path& path, const ModelParams& params) {
    if (path.extension() == ".json") {
        write_file_atomic(path, params_to_json(params).dump());
        return;
    }
    std::ostringstream buffer;
    write_params_binary(buffer, params);
    write_file_atomic(path, buffer.str());
}

ModelParams load_params(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(kPhase, "cannot open " + path.string());
    if (path.extension() == ".json") return params_from_json(nlohmann::json::parse(in));
    return read_params_binary(in);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(kPhase, "cannot write " + tmp.string());
        out << text;
        if (!out) throw Error(kPhase, "failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace synevo
