#include <fstream>

#include "corrdistill/trainer.hpp"

namespace corrdistill {

namespace {

constexpr const char* kHeadNames[6] = {"lin_weight", "lin_bias", "hid_weight",
                                       "hid_bias",   "out_weight", "out_bias"};

void write_matrix(const Matrix& m, const std::filesystem::path& path) {
  FeatureMap map(1, static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      map.at(0, static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = static_cast<float>(m(r, c));
  write_feature_archive(map, path, 2);
}

Matrix read_matrix(const std::filesystem::path& path) {
  const FeatureMap map = read_feature_archive(path);
  if (map.channels != 1) throw Error(ErrorCode::kDimension, "checkpoint tensor must have C = 1: " + path.string());
  Matrix m(static_cast<Eigen::Index>(map.height), static_cast<Eigen::Index>(map.width));
  for (std::size_t r = 0; r < map.height; ++r)
    for (std::size_t c = 0; c < map.width; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = map.at(0, r, c);
  return m;
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& dir, const nlohmann::json& extra) {
  std::filesystem::create_directories(dir);
  const auto tensors = model.head.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i)
    write_matrix(*tensors[i], dir / (std::string("head_") + kHeadNames[i] + ".dfa"));
  if (model.cluster.initialized()) write_matrix(model.cluster.centroids, dir / "cluster_centroids.dfa");
  if (model.has_linear) {
    write_matrix(model.linear.weight, dir / "linear_weight.dfa");
    write_matrix(model.linear.bias, dir / "linear_bias.dfa");
  }
  nlohmann::json meta = extra;
  meta["format"] = "corrdistill-checkpoint";
  meta["version"] = 1;
  meta["n_clusters"] = model.cluster.n_clusters;
  meta["has_cluster"] = model.cluster.initialized();
  meta["has_linear"] = model.has_linear;
  std::ofstream out(dir / "checkpoint.json", std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write checkpoint in " + dir.string());
  out << meta.dump(2) << '\n';
}

Model load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "checkpoint.json");
  if (!in) throw Error(ErrorCode::kIo, "no checkpoint.json in " + dir.string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("checkpoint.json: ") + e.what());
  }
  if (meta.value("format", "") != "corrdistill-checkpoint")
    throw Error(ErrorCode::kParse, "checkpoint.json: unexpected format");

  Model model;
  auto tensors = model.head.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i)
    *tensors[i] = read_matrix(dir / (std::string("head_") + kHeadNames[i] + ".dfa"));
  const Eigen::Index k = model.head.lin_weight.rows(), c = model.head.lin_weight.cols();
  const Eigen::Index hidden = model.head.hid_weight.rows();
  if (model.head.lin_bias.rows() != k || model.head.hid_weight.cols() != c ||
      model.head.hid_bias.rows() != hidden || model.head.out_weight.rows() != k ||
      model.head.out_weight.cols() != hidden || model.head.out_bias.rows() != k)
    throw Error(ErrorCode::kDimension, "checkpoint head tensors have inconsistent shapes");

  model.cluster = ClusterProbe(meta.value("n_clusters", std::size_t{0}));
  if (meta.value("has_cluster", false)) {
    model.cluster.centroids = read_matrix(dir / "cluster_centroids.dfa");
    if (model.cluster.centroids.rows() != k)
      throw Error(ErrorCode::kDimension, "checkpoint centroids do not match the code dimension");
    model.cluster.n_clusters = static_cast<std::size_t>(model.cluster.centroids.cols());
  }
  model.has_linear = meta.value("has_linear", false);
  if (model.has_linear) {
    model.linear.weight = read_matrix(dir / "linear_weight.dfa");
    model.linear.bias = read_matrix(dir / "linear_bias.dfa");
    if (model.linear.weight.cols() != k || model.linear.bias.rows() != model.linear.weight.rows())
      throw Error(ErrorCode::kDimension, "checkpoint linear probe does not match the code dimension");
  }
  return model;
}

}  // namespace corrdistill
