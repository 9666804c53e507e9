#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "corrdistill/adam.hpp"
#include "corrdistill/tensor.hpp"

namespace corrdistill {

inline constexpr double kProbeLearningRate = 0.005;

/// Cosine minibatch k-means: K' unit centroids trained by Adam on the mean
/// cosine distance between each code and its nearest centroid.
struct ClusterProbe {
  Matrix centroids;  // K × K', unit columns
  AdamState adam;
  AdamConfig adam_cfg{kProbeLearningRate, 0.9, 0.999, 1e-8};
  std::size_t n_clusters = 0;

  explicit ClusterProbe(std::size_t clusters = 0) : n_clusters(clusters) {}
  bool initialized() const { return centroids.cols() > 0; }
};

// Greedy farthest-point seeding: a random first code, then repeatedly the
// code with the largest cosine distance to its nearest chosen centroid.
Matrix seed_centroids(const Matrix& codes, std::size_t n_clusters, std::mt19937_64& rng);

// argmax cosine similarity per column; ties go to the lowest centroid index.
std::vector<int> assign_clusters(const Matrix& codes, const Matrix& centroids);
LabelMap assign_clusters(const FeatureMap& codes, const ClusterProbe& probe);

struct ProbeLoss {
  double value = 0.0;
  std::vector<Matrix> grads;  // one per trained tensor
};

// Mean over columns of 1 − cos(code, nearest centroid); gradient w.r.t. centroids
// with assignments held fixed.
ProbeLoss cluster_probe_loss(const Matrix& codes, const Matrix& centroids);

// Seeds on first use, then one Adam step and renormalization. Returns the loss.
double cluster_probe_step(const Matrix& codes, ClusterProbe& probe, std::mt19937_64& rng);

/// Supervised linear classifier on frozen codes.
struct LinearProbe {
  Matrix weight;  // K' × K
  Matrix bias;    // K' × 1
  AdamState adam;
  AdamConfig adam_cfg{kProbeLearningRate, 0.9, 0.999, 1e-8};

  LinearProbe() = default;
  LinearProbe(std::size_t code_dim, std::size_t n_classes)
      : weight(Matrix::Zero(static_cast<Eigen::Index>(n_classes), static_cast<Eigen::Index>(code_dim))),
        bias(Matrix::Zero(static_cast<Eigen::Index>(n_classes), 1)) {}
  std::size_t n_classes() const { return static_cast<std::size_t>(weight.rows()); }
};

// Mean softmax cross-entropy over pixels whose label is not ignored; grads = {dW, db}.
ProbeLoss linear_probe_loss(const Matrix& codes, std::span<const std::uint8_t> labels,
                            const Matrix& weight, const Matrix& bias);
double linear_probe_step(const Matrix& codes, std::span<const std::uint8_t> labels, LinearProbe& probe);
std::vector<int> linear_probe_predict(const Matrix& codes, const LinearProbe& probe);

/// rows = ground truth class, cols = predicted id.
struct ConfusionMatrix {
  std::size_t n = 0;
  std::vector<std::uint64_t> counts;

  explicit ConfusionMatrix(std::size_t size = 0) : n(size), counts(size * size, 0) {}
  std::uint64_t& at(std::size_t gt, std::size_t pred) { return counts[gt * n + pred]; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts[gt * n + pred]; }
  std::uint64_t total() const;

  // Adds every non-ignored pixel; predictions outside [0, n) throw kInvalidArgument.
  void accumulate(std::span<const int> pred, std::span<const std::uint8_t> gt);
  void merge(const ConfusionMatrix& other);
};

/// cluster_to_class[p] = class matched to predicted id p.
struct Matching {
  std::vector<int> cluster_to_class;
  std::uint64_t matched_total = 0;
};

// Maximum-weight perfect matching on the confusion counts (O(n³) shortest augmenting paths).
Matching hungarian_match(const ConfusionMatrix& confusion);

struct SegmentationMetrics {
  double accuracy = 0.0;
  double mean_iou = 0.0;
  std::vector<double> class_iou;  // NaN for classes absent from ground truth
  ConfusionMatrix confusion;      // after applying the matching
};

// Remaps predictions through the matching and scores them.
SegmentationMetrics segmentation_metrics(std::span<const LabelMap> pred, std::span<const LabelMap> gt,
                                         const Matching& matching);
SegmentationMetrics metrics_from_confusion(const ConfusionMatrix& matched);

}  // namespace corrdistill
