#include "corrdistill/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace corrdistill {

Matrix random_orthogonal(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index c = 0; c < g.cols(); ++c)
    for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < q.cols(); ++c)
    if (r(c, c) < 0) q.col(c) = -q.col(c);
  return q;
}

Dataset make_synthetic_corpus(const SyntheticCorpusConfig& config) {
  if (config.n_classes == 0 || config.n_classes > config.channels)
    throw Error(ErrorCode::kConfiguration, "synthetic corpus needs 1 <= n_classes <= channels");
  if (config.n_classes >= kIgnoreLabel)
    throw Error(ErrorCode::kConfiguration, "synthetic corpus: too many classes for 8-bit labels");
  if (config.grid < 2) throw Error(ErrorCode::kConfiguration, "synthetic corpus grid must be >= 2");
  const std::size_t g = config.grid;
  const std::size_t c = config.channels;
  const Matrix rotation = random_orthogonal(c, config.seed ^ 0x5eedULL);

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> cut(1, g - 1);
  std::uniform_int_distribution<std::size_t> cls(0, config.n_classes - 1);

  Dataset corpus;
  corpus.reserve(config.n_images);
  for (std::size_t img = 0; img < config.n_images; ++img) {
    const std::size_t row_cut = cut(rng);
    const std::size_t col_cut = cut(rng);
    std::size_t block_class[4];
    for (auto& b : block_class) b = cls(rng);

    DatasetItem item;
    char id[32];
    std::snprintf(id, sizeof(id), "synth%04zu", img);
    item.id = id;
    item.features = FeatureMap(c, g, g);
    LabelMap labels(g, g);
    for (std::size_t y = 0; y < g; ++y) {
      for (std::size_t x = 0; x < g; ++x) {
        const std::size_t block = (y < row_cut ? 0 : 2) + (x < col_cut ? 0 : 1);
        const std::size_t k = block_class[block];
        labels.at(y, x) = static_cast<std::uint8_t>(k);
        Vector v = rotation.col(static_cast<Eigen::Index>(k));
        for (Eigen::Index ch = 0; ch < v.size(); ++ch) v(ch) += config.noise_sigma * normal(rng);
        v /= std::max(v.norm(), kNormEps);
        for (std::size_t ch = 0; ch < c; ++ch) item.features.at(ch, y, x) = static_cast<float>(v(static_cast<Eigen::Index>(ch)));
      }
    }
    item.labels = std::move(labels);
    corpus.push_back(std::move(item));
  }
  return corpus;
}

TwoRegionDemo make_two_region_demo(std::size_t size, double label_noise, std::uint64_t seed,
                                   double confidence) {
  if (size < 2) throw Error(ErrorCode::kConfiguration, "two-region demo needs size >= 2");
  if (label_noise < 0 || label_noise > 1 || confidence <= 0.5 || confidence >= 1)
    throw Error(ErrorCode::kConfiguration, "two-region demo: noise in [0,1], confidence in (0.5,1)");
  static constexpr double kColors[2][3] = {{0.85, 0.25, 0.2}, {0.15, 0.35, 0.8}};
  TwoRegionDemo demo{RgbImage(size, size), LabelMap(size, size), UnaryField(size, size, 2)};
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution flip(label_noise);
  const double hi = std::log(confidence), lo = std::log(1.0 - confidence);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const std::size_t region = x < size / 2 ? 0 : 1;
      const std::size_t p = y * size + x;
      demo.truth.data[p] = static_cast<std::uint8_t>(region);
      for (std::size_t ch = 0; ch < 3; ++ch) demo.image.data[p * 3 + ch] = static_cast<float>(kColors[region][ch]);
      const std::size_t favored = flip(rng) ? 1 - region : region;
      demo.unary.at(p, favored) = hi;
      demo.unary.at(p, 1 - favored) = lo;
    }
  }
  return demo;
}

}  // namespace corrdistill
