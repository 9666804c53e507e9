#include "corrdistill/knnindex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace corrdistill {

std::array<std::size_t, 2> crop_origin(std::size_t height, std::size_t width, int index) {
  const std::size_t ch = height / 2, cw = width / 2;
  switch (index) {
    case 0: return {0, 0};
    case 1: return {0, width - cw};
    case 2: return {height - ch, 0};
    case 3: return {height - ch, width - cw};
    case 4: return {(height - ch) / 2, (width - cw) / 2};
    default: throw Error(ErrorCode::kInvalidArgument, "crop index must be 0..4");
  }
}

namespace {

void check_croppable(std::size_t height, std::size_t width) {
  if (height < 2 || width < 2) throw Error(ErrorCode::kDimension, "five_crop needs H, W >= 2");
}

}  // namespace

std::array<FeatureMap, 5> five_crop(const FeatureMap& map) {
  check_croppable(map.height, map.width);
  const std::size_t ch = map.height / 2, cw = map.width / 2;
  std::array<FeatureMap, 5> crops;
  for (int k = 0; k < 5; ++k) {
    const auto [r0, c0] = crop_origin(map.height, map.width, k);
    FeatureMap crop(map.channels, ch, cw);
    for (std::size_t c = 0; c < map.channels; ++c)
      for (std::size_t y = 0; y < ch; ++y)
        for (std::size_t x = 0; x < cw; ++x) crop.at(c, y, x) = map.at(c, r0 + y, c0 + x);
    crops[static_cast<std::size_t>(k)] = std::move(crop);
  }
  return crops;
}

std::array<LabelMap, 5> five_crop(const LabelMap& labels) {
  check_croppable(labels.height, labels.width);
  const std::size_t ch = labels.height / 2, cw = labels.width / 2;
  std::array<LabelMap, 5> crops;
  for (int k = 0; k < 5; ++k) {
    const auto [r0, c0] = crop_origin(labels.height, labels.width, k);
    LabelMap crop(ch, cw);
    for (std::size_t y = 0; y < ch; ++y)
      for (std::size_t x = 0; x < cw; ++x) crop.at(y, x) = labels.at(r0 + y, c0 + x);
    crops[static_cast<std::size_t>(k)] = std::move(crop);
  }
  return crops;
}

std::array<RgbImage, 5> five_crop(const RgbImage& image) {
  check_croppable(image.height, image.width);
  const std::size_t ch = image.height / 2, cw = image.width / 2;
  std::array<RgbImage, 5> crops;
  for (int k = 0; k < 5; ++k) {
    const auto [r0, c0] = crop_origin(image.height, image.width, k);
    RgbImage crop(ch, cw);
    for (std::size_t y = 0; y < ch; ++y)
      for (std::size_t x = 0; x < cw; ++x)
        for (std::size_t c = 0; c < 3; ++c) crop.at(y, x, c) = image.at(r0 + y, c0 + x, c);
    crops[static_cast<std::size_t>(k)] = std::move(crop);
  }
  return crops;
}

Dataset five_crop_dataset(const Dataset& dataset) {
  Dataset out;
  out.reserve(dataset.size() * 5);
  for (const auto& item : dataset) {
    auto feats = five_crop(item.features);
    std::optional<std::array<LabelMap, 5>> labels;
    if (item.labels) labels = five_crop(*item.labels);
    for (int k = 0; k < 5; ++k) {
      DatasetItem crop;
      crop.id = item.id + "/c" + std::to_string(k);
      crop.features = std::move(feats[static_cast<std::size_t>(k)]);
      if (labels) crop.labels = std::move((*labels)[static_cast<std::size_t>(k)]);
      crop.provenance = CropProvenance{item.id, k};
      out.push_back(std::move(crop));
    }
  }
  return out;
}

Vector global_pool(const FeatureMap& map) {
  Vector mean = Vector::Zero(static_cast<Eigen::Index>(map.channels));
  const std::size_t n = map.locations();
  for (std::size_t c = 0; c < map.channels; ++c) {
    double sum = 0.0;
    for (std::size_t p = 0; p < n; ++p) sum += map.data[c * n + p];
    mean(static_cast<Eigen::Index>(c)) = n > 0 ? sum / static_cast<double>(n) : 0.0;
  }
  return mean / std::max(mean.norm(), kNormEps);
}

double pooled_similarity(const Matrix& pooled, std::size_t a, std::size_t b) {
  double dot = 0.0;
  for (Eigen::Index c = 0; c < pooled.rows(); ++c)
    dot += pooled(c, static_cast<Eigen::Index>(a)) * pooled(c, static_cast<Eigen::Index>(b));
  return dot;
}

KnnIndex build_knn_index(const Matrix& pooled, std::size_t k_nn) {
  const auto n = static_cast<std::size_t>(pooled.cols());
  if (k_nn == 0 || n < k_nn + 1)
    throw Error(ErrorCode::kConfiguration, "build_knn_index: need at least k_nn + 1 entries");
  KnnIndex index;
  index.pooled = pooled;
  index.neighbors.resize(n);
  index.similarities.resize(n);

  // "a ranks before b": higher similarity, then lower index.
  using Cand = std::pair<double, std::size_t>;
  auto better = [](const Cand& a, const Cand& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  for (std::size_t q = 0; q < n; ++q) {
    // Bounded insertion list of the current best k_nn candidates.
    std::vector<Cand> best;
    best.reserve(k_nn + 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == q) continue;
      const Cand cand{pooled_similarity(pooled, q, j), j};
      if (best.size() == k_nn && !better(cand, best.back())) continue;
      best.insert(std::upper_bound(best.begin(), best.end(), cand, better), cand);
      if (best.size() > k_nn) best.pop_back();
    }
    for (const auto& [sim, j] : best) {
      index.neighbors[q].push_back(j);
      index.similarities[q].push_back(sim);
    }
  }
  return index;
}

KnnIndex build_knn_index(const Dataset& dataset, std::size_t k_nn) {
  if (dataset.empty()) throw Error(ErrorCode::kConfiguration, "build_knn_index: empty dataset");
  Matrix pooled(static_cast<Eigen::Index>(dataset.front().features.channels),
                static_cast<Eigen::Index>(dataset.size()));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].features.channels != dataset.front().features.channels)
      throw Error(ErrorCode::kDimension, "build_knn_index: channel count differs across entries");
    pooled.col(static_cast<Eigen::Index>(i)) = global_pool(dataset[i].features);
  }
  KnnIndex index = build_knn_index(pooled, k_nn);
  for (const auto& item : dataset) {
    index.ids.push_back(item.id);
    index.parents.push_back(item.provenance ? item.provenance->parent_id : std::string());
  }
  return index;
}

std::vector<BatchTriple> sample_batch(const KnnIndex& index, std::size_t batch_size,
                                      std::mt19937_64& rng) {
  if (batch_size < 2) throw Error(ErrorCode::kConfiguration, "sample_batch: batch_size must be >= 2");
  if (batch_size > index.size())
    throw Error(ErrorCode::kConfiguration, "sample_batch: batch_size exceeds index size");

  std::vector<std::size_t> order(index.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(batch_size);

  std::vector<std::size_t> perm(batch_size);
  std::iota(perm.begin(), perm.end(), 0);
  for (;;) {
    std::shuffle(perm.begin(), perm.end(), rng);
    bool fixed_point = false;
    for (std::size_t i = 0; i < batch_size; ++i) fixed_point = fixed_point || perm[i] == i;
    if (!fixed_point) break;
  }

  std::uniform_int_distribution<std::size_t> pick(0, index.k() - 1);
  std::vector<BatchTriple> batch(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    batch[i].x = order[i];
    batch[i].knn = index.neighbors[order[i]][pick(rng)];
    batch[i].rand = order[perm[i]];
  }
  return batch;
}

std::vector<std::size_t> self_match_stats(const KnnIndex& index) {
  if (index.parents.size() != index.size())
    throw Error(ErrorCode::kConfiguration, "self_match_stats: index has no provenance");
  for (const auto& p : index.parents)
    if (p.empty()) throw Error(ErrorCode::kConfiguration, "self_match_stats: entry without crop provenance");
  std::vector<std::size_t> hist(index.k() + 1, 0);
  for (std::size_t q = 0; q < index.size(); ++q) {
    std::size_t same = 0;
    for (std::size_t j : index.neighbors[q]) same += index.parents[j] == index.parents[q] ? 1 : 0;
    ++hist[same];
  }
  return hist;
}

}  // namespace corrdistill
