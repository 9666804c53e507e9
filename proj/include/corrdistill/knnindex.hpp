#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "corrdistill/tensorio.hpp"

namespace corrdistill {

inline constexpr std::size_t kDefaultKnn = 7;

// Crop order: top-left, top-right, bottom-left, bottom-right, center.
// Each crop is ⌊H/2⌋ × ⌊W/2⌋.
std::array<FeatureMap, 5> five_crop(const FeatureMap& map);
std::array<LabelMap, 5> five_crop(const LabelMap& labels);
std::array<RgbImage, 5> five_crop(const RgbImage& image);

// Top-left (row, col) of crop `index` for an H×W map.
std::array<std::size_t, 2> crop_origin(std::size_t height, std::size_t width, int index);

// Replaces each item by its five crops, recording provenance (ids become <id>/c<k>).
Dataset five_crop_dataset(const Dataset& dataset);

// Spatial mean per channel, then L2-normalized with the eps guard.
Vector global_pool(const FeatureMap& map);

struct KnnIndex {
  Matrix pooled;                                 // C × N unit columns
  std::vector<std::vector<std::size_t>> neighbors;  // N × k_nn, most similar first
  std::vector<std::vector<double>> similarities;    // matching cosine similarities
  std::vector<std::string> ids;
  std::vector<std::string> parents;  // empty string when provenance is unknown

  std::size_t size() const { return neighbors.size(); }
  std::size_t k() const { return neighbors.empty() ? 0 : neighbors.front().size(); }
};

// Cosine similarity used for ranking; a plain sequential dot product.
double pooled_similarity(const Matrix& pooled, std::size_t a, std::size_t b);

// Exact top-k_nn by cosine excluding the entry itself. Ties go to the lower index.
KnnIndex build_knn_index(const Dataset& dataset, std::size_t k_nn = kDefaultKnn);
KnnIndex build_knn_index(const Matrix& pooled, std::size_t k_nn);

struct BatchTriple {
  std::size_t x;
  std::size_t knn;
  std::size_t rand;
};

// x without replacement, knn uniform over x's neighbors, rand a derangement of the batch.
std::vector<BatchTriple> sample_batch(const KnnIndex& index, std::size_t batch_size,
                                      std::mt19937_64& rng);

// hist[c] = number of entries with exactly c same-parent crops among their neighbors.
std::vector<std::size_t> self_match_stats(const KnnIndex& index);

}  // namespace corrdistill
