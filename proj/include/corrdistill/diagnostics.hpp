#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "corrdistill/corrvol.hpp"

namespace corrdistill {

/// Precision/recall at each distinct score threshold, highest threshold first.
struct PRCurve {
  std::vector<double> thresholds;
  std::vector<double> precision;
  std::vector<double> recall;
  double average_precision = 0.0;
};

struct ScoredTarget {
  double score;
  bool positive;
};

// Step-interpolated AP: Σ_k (R_k − R_{k−1})·P_k over tie groups of equal score.
PRCurve precision_recall(std::span<const ScoredTarget> entries);

// Scores every non-ignored entry of each correspondence volume against the
// paired co-occurrence volume.
PRCurve correspondence_ap(
    std::span<const std::pair<CorrVolume, CoOccurrenceVolume>> pairs);

// Precision at the first threshold whose recall reaches `recall` (0 if never).
double precision_at_recall(const PRCurve& curve, double recall);

inline constexpr std::size_t kHistogramBins = 64;

struct SimilarityHistogram {
  std::vector<double> bin_edges;  // kHistogramBins + 1 edges over [-1, 1]
  std::vector<std::uint64_t> counts;

  std::uint64_t total() const;
  // Fraction of samples in bins whose center lies in [lo, hi].
  double mass_between(double lo, double hi) const;
};

SimilarityHistogram empty_similarity_histogram();
std::size_t similarity_bin(double cosine);

// Samples location pairs (with replacement) of one code map and bins their cosines.
SimilarityHistogram similarity_histogram(const FeatureMap& codes, std::size_t n_pairs,
                                         std::uint64_t rng_seed);
SimilarityHistogram similarity_histogram(const Matrix& codes, std::size_t n_pairs,
                                         std::uint64_t rng_seed);

}  // namespace corrdistill
