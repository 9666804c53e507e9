#include <doctest.h>

#include <cstring>
#include <fstream>

#include "corrdistill/tensorio.hpp"
#include "test_util.hpp"

using namespace corrdistill;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

}  // namespace

TEST_CASE("archive size arithmetic") {
  FeatureMap one(1, 1, 1, 0.0f);
  const auto bytes = encode_feature_archive(one);
  CHECK(bytes.size() == kArchiveHeaderBytes + 4);
  CHECK(std::memcmp(bytes.data(), "DFA1", 4) == 0);
  CHECK(bytes[4] == kDtypeF32);
  for (std::size_t i = kArchiveHeaderBytes; i < bytes.size(); ++i) CHECK(bytes[i] == 0);

  FeatureMap cube(2, 2, 2, 1.0f);
  CHECK(encode_feature_archive(cube).size() == kArchiveHeaderBytes + 32);
}

TEST_CASE("archive round trip is bitwise") {
  std::mt19937_64 rng(4);
  const FeatureMap map = testutil::random_map(3, 4, 5, rng);
  const auto dir = testutil::scratch_dir("archive");
  write_feature_archive(map, dir / "m.dfa");
  const FeatureMap back = read_feature_archive(dir / "m.dfa");
  CHECK(back.channels == 3);
  CHECK(back.height == 4);
  CHECK(back.width == 5);
  CHECK(std::memcmp(back.data.data(), map.data.data(), map.data.size() * sizeof(float)) == 0);
}

TEST_CASE("archive header is little-endian") {
  FeatureMap map(3, 4, 5);
  const auto bytes = encode_feature_archive(map);
  CHECK(bytes[6] == 3);
  CHECK(bytes[7] == 0);
  CHECK(bytes[10] == 4);
  CHECK(bytes[14] == 5);
}

TEST_CASE("archive decoding errors") {
  FeatureMap map(2, 2, 2, 0.5f);
  auto bytes = encode_feature_archive(map);

  auto bad_magic = bytes;
  std::memcpy(bad_magic.data(), "XXXX", 4);
  CHECK(code_of([&] { decode_feature_archive(bad_magic); }) == ErrorCode::kBadMagic);

  auto bad_dtype = bytes;
  bad_dtype[4] = 7;
  CHECK(code_of([&] { decode_feature_archive(bad_dtype); }) == ErrorCode::kBadDtype);

  auto truncated = bytes;
  truncated.pop_back();
  CHECK(code_of([&] { decode_feature_archive(truncated); }) == ErrorCode::kSizeMismatch);

  auto short_header = std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 6);
  CHECK(code_of([&] { decode_feature_archive(short_header); }) == ErrorCode::kSizeMismatch);

  FeatureMap bad(1, 1, 1, std::numeric_limits<float>::quiet_NaN());
  auto nan_bytes = encode_feature_archive(FeatureMap(1, 1, 1, 0.0f));
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan_bytes.data() + kArchiveHeaderBytes, &nan, 4);
  CHECK(code_of([&] { decode_feature_archive(nan_bytes); }) == ErrorCode::kNonFinite);

  CHECK(code_of([] { read_feature_archive("/nonexistent/x.dfa"); }) == ErrorCode::kIo);
}

TEST_CASE("l2 normalization") {
  FeatureMap map(2, 1, 3);
  map.at(0, 0, 0) = 3;
  map.at(1, 0, 0) = 4;
  map.at(0, 0, 2) = 0.6f;
  map.at(1, 0, 2) = 0.8f;
  const FeatureMap n = l2_normalize_channels(map);
  CHECK(n.at(0, 0, 0) == doctest::Approx(0.6).epsilon(1e-7));
  CHECK(n.at(1, 0, 0) == doctest::Approx(0.8).epsilon(1e-7));
  CHECK(n.at(0, 0, 1) == 0.0f);
  CHECK(n.at(1, 0, 1) == 0.0f);
  CHECK(std::abs(n.at(0, 0, 2) - 0.6f) < 1e-7);
  CHECK(std::abs(n.at(1, 0, 2) - 0.8f) < 1e-7);
}

TEST_CASE("pgm and ppm round trip") {
  const auto dir = testutil::scratch_dir("pnm");
  LabelMap labels(3, 4);
  for (std::size_t i = 0; i < labels.data.size(); ++i) labels.data[i] = static_cast<std::uint8_t>(i * 7);
  labels.data[5] = kIgnoreLabel;
  write_label_pgm(labels, dir / "l.pgm");
  CHECK(read_label_pgm(dir / "l.pgm") == labels);

  RgbImage img(2, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i) / 17.0f;
  write_rgb_ppm(img, dir / "i.ppm");
  const RgbImage back = read_rgb_ppm(dir / "i.ppm");
  REQUIRE(back.data.size() == img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5f / 255.0f + 1e-6f);
}

TEST_CASE("manifest parsing") {
  const std::string text = R"({"entries": [
    {"id": "a", "feature_path": "a.dfa", "label_path": "a.pgm", "source_image_path": null,
     "crop_provenance": {"parent_id": "p", "crop_index": 3}},
    {"id": "b", "feature_path": "/abs/b.dfa", "label_path": null, "source_image_path": "img/b.ppm",
     "crop_provenance": null}]})";
  const auto m = parse_manifest(text, "/base");
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0].feature_path == std::filesystem::path("/base/a.dfa"));
  CHECK(*m.entries[0].label_path == std::filesystem::path("/base/a.pgm"));
  CHECK_FALSE(m.entries[0].source_image_path);
  CHECK(m.entries[0].crop_provenance->parent_id == "p");
  CHECK(m.entries[0].crop_provenance->crop_index == 3);
  CHECK(m.entries[1].feature_path == std::filesystem::path("/abs/b.dfa"));
  CHECK_FALSE(m.entries[1].label_path);
  CHECK(*m.entries[1].source_image_path == std::filesystem::path("/base/img/b.ppm"));
  CHECK_FALSE(m.entries[1].crop_provenance);

  const std::string dup = R"({"entries": [{"id": "a", "feature_path": "a.dfa"}, {"id": "a", "feature_path": "b.dfa"}]})";
  CHECK(code_of([&] { parse_manifest(dup); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { parse_manifest("{not json"); }) == ErrorCode::kParse);
}

TEST_CASE("dataset save and load") {
  std::mt19937_64 rng(9);
  Dataset d;
  for (int i = 0; i < 3; ++i) {
    DatasetItem item;
    item.id = "img" + std::to_string(i);
    item.features = testutil::random_map(4, 3, 3, rng);
    LabelMap l(3, 3, static_cast<std::uint8_t>(i));
    item.labels = l;
    if (i == 2) item.provenance = CropProvenance{"img0", 4};
    d.push_back(item);
  }
  const auto dir = testutil::scratch_dir("dataset");
  save_dataset(d, dir);
  const Dataset back = load_dataset(dir / "manifest.json");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].id == d[i].id);
    CHECK(back[i].features == d[i].features);
    CHECK(*back[i].labels == *d[i].labels);
  }
  CHECK(back[2].provenance->parent_id == "img0");
  CHECK(back[2].provenance->crop_index == 4);
  CHECK_FALSE(back[0].provenance);
}
