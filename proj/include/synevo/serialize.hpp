#pragma once

#include <filesystem>
#include <iosfwd>

#include "json.hpp"
#include "synevo/backbone.hpp"

namespace synevo {

// JSON form: {"arch": {...}, "layout": [{"name","rows","cols","offset"}...], "values": [...]}.
// Doubles are written with round-trip precision.
nlohmann::json arch_to_json(const ArchConfig& arch);
ArchConfig arch_from_json(const nlohmann::json& j);
nlohmann::json params_to_json(const ModelParams& params);
ModelParams params_from_json(const nlohmann::json& j);

// Binary form, little-endian host layout:
//   magic "SYNEVOP1", u64 × 6 arch fields, u64 layer count, per layer
//   (u64 name length, name bytes, u64 rows, u64 cols), u64 value count, f64 values.
void write_params_binary(std::ostream& out, const ModelParams& params);
ModelParams read_params_binary(std::istream& in);

void save_params(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_params(const std::filesystem::path& path);

/// Writes `text` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

} // namespace synevo
