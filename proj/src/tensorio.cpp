#include "corrdistill/tensorio.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

namespace corrdistill {

static_assert(std::endian::native == std::endian::little,
              "archive encoding assumes a little-endian host");

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kBadDtype: return "bad-dtype";
    case ErrorCode::kSizeMismatch: return "size-mismatch";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kConfiguration: return "configuration";
    case ErrorCode::kDegenerateTarget: return "degenerate-target";
    case ErrorCode::kDegenerateInput: return "degenerate-input";
    case ErrorCode::kResource: return "resource";
    case ErrorCode::kContract: return "contract";
    case ErrorCode::kParse: return "parse";
  }
  return "unknown";
}

Matrix FeatureMap::as_matrix() const {
  Matrix m(channels, locations());
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t p = 0; p < locations(); ++p)
      m(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(p)) = data[c * locations() + p];
  return m;
}

FeatureMap FeatureMap::from_matrix(const Matrix& m, std::size_t h, std::size_t w) {
  if (static_cast<std::size_t>(m.cols()) != h * w)
    throw Error(ErrorCode::kDimension, "matrix columns do not match H·W");
  FeatureMap out(static_cast<std::size_t>(m.rows()), h, w);
  for (Eigen::Index c = 0; c < m.rows(); ++c)
    for (Eigen::Index p = 0; p < m.cols(); ++p)
      out.data[static_cast<std::size_t>(c * m.cols() + p)] = static_cast<float>(m(c, p));
  return out;
}

void FeatureMap::validate() const {
  if (channels == 0 || height == 0 || width == 0)
    throw Error(ErrorCode::kDimension, "feature map dimensions must be positive");
  if (data.size() != channels * height * width)
    throw Error(ErrorCode::kSizeMismatch, "feature map data length != C·H·W");
  for (float v : data)
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "feature map contains non-finite values");
}

Matrix normalize_columns(const Matrix& m, double eps) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double norm = std::max(m.col(j).norm(), eps);
    out.col(j) = m.col(j) / norm;
  }
  return out;
}

Matrix normalize_columns_backward(const Matrix& input, const Matrix& grad_normalized, double eps) {
  Matrix grad(input.rows(), input.cols());
  for (Eigen::Index j = 0; j < input.cols(); ++j) {
    const double norm = input.col(j).norm();
    if (norm > eps) {
      const Vector unit = input.col(j) / norm;
      grad.col(j) = (grad_normalized.col(j) - unit * unit.dot(grad_normalized.col(j))) / norm;
    } else {
      grad.col(j) = grad_normalized.col(j) / eps;
    }
  }
  return grad;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

// Netpbm header: magic, width, height, maxval separated by whitespace/comments,
// followed by exactly one whitespace byte.
struct NetpbmHeader {
  std::string magic;
  std::size_t width = 0, height = 0, maxval = 0;
  std::size_t payload_offset = 0;
};

NetpbmHeader parse_netpbm(const std::vector<std::uint8_t>& bytes, const std::string& expected) {
  NetpbmHeader hdr;
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto token = [&] {
    skip_space();
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  hdr.magic = token();
  if (hdr.magic != expected) throw Error(ErrorCode::kBadMagic, "expected netpbm " + expected);
  try {
    hdr.width = std::stoul(token());
    hdr.height = std::stoul(token());
    hdr.maxval = std::stoul(token());
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParse, "malformed netpbm header");
  }
  if (hdr.maxval != 255) throw Error(ErrorCode::kParse, "only 8-bit netpbm files are supported");
  if (pos >= bytes.size()) throw Error(ErrorCode::kSizeMismatch, "netpbm payload missing");
  hdr.payload_offset = pos + 1;
  return hdr;
}

}  // namespace

std::vector<std::uint8_t> encode_feature_archive(const FeatureMap& map, std::uint8_t rank) {
  if (rank < 1 || rank > 3) throw Error(ErrorCode::kDimension, "archive rank must be 1..3");
  if (map.data.size() != map.channels * map.height * map.width)
    throw Error(ErrorCode::kSizeMismatch, "feature map data length != C·H·W");
  std::vector<std::uint8_t> out;
  out.reserve(kArchiveHeaderBytes + map.data.size() * 4);
  for (char c : std::string_view("DFA1")) out.push_back(static_cast<std::uint8_t>(c));
  out.push_back(kDtypeF32);
  out.push_back(rank);
  put_u32(out, static_cast<std::uint32_t>(map.channels));
  put_u32(out, static_cast<std::uint32_t>(map.height));
  put_u32(out, static_cast<std::uint32_t>(map.width));
  const auto* raw = reinterpret_cast<const std::uint8_t*>(map.data.data());
  out.insert(out.end(), raw, raw + map.data.size() * sizeof(float));
  return out;
}

FeatureMap decode_feature_archive(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "DFA1", 4) != 0)
    throw Error(ErrorCode::kBadMagic, "archive does not start with DFA1");
  if (bytes.size() < kArchiveHeaderBytes)
    throw Error(ErrorCode::kSizeMismatch, "archive header truncated");
  if (bytes[4] != kDtypeF32) throw Error(ErrorCode::kBadDtype, "unsupported archive dtype");
  const std::uint8_t rank = bytes[5];
  if (rank < 1 || rank > 3) throw Error(ErrorCode::kDimension, "archive rank must be 1..3");
  FeatureMap map;
  map.channels = get_u32(bytes.data() + 6);
  map.height = get_u32(bytes.data() + 10);
  map.width = get_u32(bytes.data() + 14);
  const std::size_t count = map.channels * map.height * map.width;
  if (bytes.size() != kArchiveHeaderBytes + count * 4)
    throw Error(ErrorCode::kSizeMismatch, "archive payload size does not match its dims");
  map.data.resize(count);
  std::memcpy(map.data.data(), bytes.data() + kArchiveHeaderBytes, count * 4);
  for (float v : map.data)
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "archive contains non-finite values");
  return map;
}

void write_feature_archive(const FeatureMap& map, const std::filesystem::path& path, std::uint8_t rank) {
  write_file(path, encode_feature_archive(map, rank));
}

FeatureMap read_feature_archive(const std::filesystem::path& path) {
  return decode_feature_archive(read_file(path));
}

FeatureMap l2_normalize_channels(const FeatureMap& map, double eps) {
  FeatureMap out = map;
  const std::size_t n = map.locations();
  for (std::size_t p = 0; p < n; ++p) {
    double sq = 0.0;
    for (std::size_t c = 0; c < map.channels; ++c) {
      const double v = map.data[c * n + p];
      sq += v * v;
    }
    const double norm = std::max(std::sqrt(sq), eps);
    for (std::size_t c = 0; c < map.channels; ++c)
      out.data[c * n + p] = static_cast<float>(map.data[c * n + p] / norm);
  }
  return out;
}

void write_label_pgm(const LabelMap& labels, const std::filesystem::path& path) {
  std::ostringstream hdr;
  hdr << "P5\n" << labels.width << " " << labels.height << "\n255\n";
  const std::string h = hdr.str();
  std::vector<std::uint8_t> bytes(h.begin(), h.end());
  bytes.insert(bytes.end(), labels.data.begin(), labels.data.end());
  write_file(path, bytes);
}

LabelMap read_label_pgm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const auto hdr = parse_netpbm(bytes, "P5");
  if (bytes.size() - hdr.payload_offset != hdr.width * hdr.height)
    throw Error(ErrorCode::kSizeMismatch, "PGM payload size mismatch in " + path.string());
  LabelMap labels(hdr.height, hdr.width);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(hdr.payload_offset), bytes.end(),
            labels.data.begin());
  return labels;
}

void write_rgb_ppm(const RgbImage& image, const std::filesystem::path& path) {
  std::ostringstream hdr;
  hdr << "P6\n" << image.width << " " << image.height << "\n255\n";
  const std::string h = hdr.str();
  std::vector<std::uint8_t> bytes(h.begin(), h.end());
  for (float v : image.data)
    bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  write_file(path, bytes);
}

RgbImage read_rgb_ppm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const auto hdr = parse_netpbm(bytes, "P6");
  if (bytes.size() - hdr.payload_offset != hdr.width * hdr.height * 3)
    throw Error(ErrorCode::kSizeMismatch, "PPM payload size mismatch in " + path.string());
  RgbImage image(hdr.height, hdr.width);
  for (std::size_t i = 0; i < image.data.size(); ++i)
    image.data[i] = static_cast<float>(bytes[hdr.payload_offset + i]) / 255.0f;
  return image;
}

DatasetManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("manifest: ") + e.what());
  }
  if (!doc.contains("entries") || !doc["entries"].is_array())
    throw Error(ErrorCode::kParse, "manifest: missing 'entries' array");
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  DatasetManifest manifest;
  std::set<std::string> seen;
  for (const auto& e : doc["entries"]) {
    ManifestEntry entry;
    try {
      entry.id = e.at("id").get<std::string>();
      entry.feature_path = resolve(e.at("feature_path").get<std::string>());
      if (e.contains("label_path") && !e["label_path"].is_null())
        entry.label_path = resolve(e["label_path"].get<std::string>());
      if (e.contains("source_image_path") && !e["source_image_path"].is_null())
        entry.source_image_path = resolve(e["source_image_path"].get<std::string>());
      if (e.contains("crop_provenance") && !e["crop_provenance"].is_null()) {
        const auto& cp = e["crop_provenance"];
        CropProvenance prov{cp.at("parent_id").get<std::string>(), cp.at("crop_index").get<int>()};
        if (prov.crop_index < 0 || prov.crop_index > 4)
          throw Error(ErrorCode::kParse, "manifest: crop_index must be 0..4");
        entry.crop_provenance = prov;
      }
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::kParse, std::string("manifest entry: ") + ex.what());
    }
    if (!seen.insert(entry.id).second)
      throw Error(ErrorCode::kInvalidArgument, "manifest: duplicate id '" + entry.id + "'");
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_manifest(std::string(bytes.begin(), bytes.end()), path.parent_path());
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  const auto base = path.parent_path();
  auto rel = [&](const std::filesystem::path& p) {
    return base.empty() ? p.generic_string() : p.lexically_relative(base).generic_string();
  };
  nlohmann::json doc;
  doc["entries"] = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    nlohmann::json j;
    j["id"] = e.id;
    j["feature_path"] = rel(e.feature_path);
    j["label_path"] = e.label_path ? nlohmann::json(rel(*e.label_path)) : nlohmann::json(nullptr);
    j["source_image_path"] =
        e.source_image_path ? nlohmann::json(rel(*e.source_image_path)) : nlohmann::json(nullptr);
    if (e.crop_provenance)
      j["crop_provenance"] = {{"parent_id", e.crop_provenance->parent_id},
                              {"crop_index", e.crop_provenance->crop_index}};
    else
      j["crop_provenance"] = nullptr;
    doc["entries"].push_back(std::move(j));
  }
  const std::string text = doc.dump(2) + "\n";
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Dataset load_dataset(const DatasetManifest& manifest) {
  Dataset dataset;
  dataset.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    DatasetItem item;
    item.id = e.id;
    item.features = read_feature_archive(e.feature_path);
    item.features.validate();
    if (e.label_path) {
      item.labels = read_label_pgm(*e.label_path);
      if (item.labels->height != item.features.height || item.labels->width != item.features.width)
        throw Error(ErrorCode::kDimension, "label map size differs from features for " + e.id);
    }
    item.provenance = e.crop_provenance;
    dataset.push_back(std::move(item));
  }
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  return load_dataset(read_manifest(manifest_path));
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  DatasetManifest manifest;
  for (const auto& item : dataset) {
    ManifestEntry e;
    e.id = item.id;
    e.feature_path = dir / (item.id + ".dfa");
    write_feature_archive(item.features, e.feature_path);
    if (item.labels) {
      e.label_path = dir / (item.id + ".pgm");
      write_label_pgm(*item.labels, *e.label_path);
    }
    e.crop_provenance = item.provenance;
    manifest.entries.push_back(std::move(e));
  }
  write_manifest(manifest, dir / "manifest.json");
}

}  // namespace corrdistill
