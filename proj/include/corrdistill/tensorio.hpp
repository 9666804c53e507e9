#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "corrdistill/tensor.hpp"

namespace corrdistill {

// DFA1 archive layout:
//   "DFA1" | u8 dtype (1 = f32) | u8 rank | u32 C | u32 H | u32 W | C·H·W f32
// All integers and floats little-endian.
inline constexpr std::size_t kArchiveHeaderBytes = 4 + 1 + 1 + 3 * 4;
inline constexpr std::uint8_t kDtypeF32 = 1;

void write_feature_archive(const FeatureMap& map, const std::filesystem::path& path,
                           std::uint8_t rank = 3);
FeatureMap read_feature_archive(const std::filesystem::path& path);

// In-memory variants used by the file functions and by tests.
// rank is informational (1..3); dims are always written as C, H, W.
std::vector<std::uint8_t> encode_feature_archive(const FeatureMap& map, std::uint8_t rank = 3);
FeatureMap decode_feature_archive(std::span<const std::uint8_t> bytes);

FeatureMap l2_normalize_channels(const FeatureMap& map, double eps = kNormEps);

// Binary PGM (P5, maxval 255) and PPM (P6) helpers.
void write_label_pgm(const LabelMap& labels, const std::filesystem::path& path);
LabelMap read_label_pgm(const std::filesystem::path& path);
void write_rgb_ppm(const RgbImage& image, const std::filesystem::path& path);
RgbImage read_rgb_ppm(const std::filesystem::path& path);

struct CropProvenance {
  std::string parent_id;
  int crop_index = 0;  // 0..4: top-left, top-right, bottom-left, bottom-right, center
};

struct ManifestEntry {
  std::string id;
  std::filesystem::path feature_path;
  std::optional<std::filesystem::path> label_path;
  std::optional<std::filesystem::path> source_image_path;
  std::optional<CropProvenance> crop_provenance;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

// Relative paths in the manifest are resolved against the manifest's directory.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest parse_manifest(const std::string& json_text,
                               const std::filesystem::path& base_dir = {});

struct DatasetItem {
  std::string id;
  FeatureMap features;
  std::optional<LabelMap> labels;
  std::optional<CropProvenance> provenance;
};

using Dataset = std::vector<DatasetItem>;

Dataset load_dataset(const DatasetManifest& manifest);
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes each item as <dir>/<id>.dfa (+ <id>.pgm) and a manifest.json next to them.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

}  // namespace corrdistill
