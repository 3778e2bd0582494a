#pragma once

#include "confsplat/core.hpp"
#include "confsplat/raster.hpp"
#include "confsplat/train.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace confsplat::io {

/// Property names used for the confidence extension.
struct PlyNames {
    std::string raw_alpha = "conf_alpha_raw";
    std::string raw_beta = "conf_beta_raw";
    std::string confidence = "confidence";
};

struct PlyScene {
    SplatSet scene;
    std::optional<ConfidenceField> field;
};

/// Reads a 3DGS vertex PLY (binary little-endian or ASCII).
PlyScene load_ply(const std::filesystem::path& path, const PlyNames& names = {});
PlyScene parse_ply(std::string_view bytes, const PlyNames& names = {});

struct PlySaveOptions {
    bool include_convenience_confidence = false;
    PlyNames names;
};

/// Binary little-endian output. The field, when given, must match the scene.
void save_ply(const SplatSet& scene, const ConfidenceField* field, const std::filesystem::path& path,
              const PlySaveOptions& options = {});
std::string serialize_ply(const SplatSet& scene, const ConfidenceField* field, const PlySaveOptions& options = {});

struct CameraEntry {
    Camera camera;
    std::optional<std::filesystem::path> image;  // resolved against the JSON file's directory
};

std::vector<CameraEntry> load_cameras(const std::filesystem::path& path);
std::vector<CameraEntry> parse_cameras(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
nlohmann::json cameras_to_json(std::span<const CameraEntry> cameras);
void save_cameras(std::span<const CameraEntry> cameras, const std::filesystem::path& path);

/// Everything a TOML config file can set.
struct AppConfig {
    train::TrainConfig train;
    raster::RenderSettings render;
    PlyNames ply;
};

AppConfig load_config(const std::filesystem::path& path);
AppConfig parse_config(std::string_view text);
/// Canonical form: every key, defaults filled in, sorted.
nlohmann::json config_to_json(const AppConfig& config);
/// SHA-256 (hex) of the canonical JSON dump.
std::string config_hash(const AppConfig& config);

std::string sha256_hex(std::string_view data);

/// "inf" for infinite PSNR, otherwise fixed with 6 decimals.
std::string format_metric(double value);

std::string sweep_csv(std::span<const SweepRow> rows);
void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path);

struct ReportMeta {
    std::string scene_path;
    std::size_t n_splats = 0;
    int sh_degree = 0;
    std::string mode;
    std::string config_hash;
    std::uint64_t seed = 42;
};

nlohmann::json sweep_report(std::span<const SweepRow> rows, const ReportMeta& meta);

std::string history_csv(std::span<const train::HistoryEntry> history);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace confsplat::io
