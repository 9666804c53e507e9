#pragma once

#include <vector>

#include "corrdistill/disthead.hpp"

namespace corrdistill {

struct PixelVertex {
  std::size_t image = 0;
  std::size_t h = 0;
  std::size_t w = 0;
};

/// Fully connected weighted graph over pixels. weights(i, j) = w(v_i, v_j);
/// codes hold one row per vertex, labels (optional) one class per vertex.
struct PixelGraph {
  std::vector<PixelVertex> vertices;
  Matrix weights;
  Matrix codes;
  std::vector<int> labels;

  std::size_t size() const { return vertices.size(); }
  void validate() const;
};

enum class Compatibility { kCosineDistance, kPottsIndicator };

// E = Σ over all ordered vertex pairs (self-pairs included) of w·μ.
// kPottsIndicator uses labels, or the argmax of each code row when labels are empty.
double potts_energy(const PixelGraph& graph, Compatibility compatibility);

// Returns a copy with vertices (and the matching weight rows/cols, codes, labels) permuted.
PixelGraph permute_vertices(const PixelGraph& graph, const std::vector<std::size_t>& order);

struct EquivalenceReport {
  double energy = 0.0;        // E(φ) with w = F − b, μ = 1 − cos
  double weight_sum = 0.0;    // Σ w over all ordered pairs
  double loss_sum = 0.0;      // Σ_{x,y} simple_corr_loss(x, y, b)
  double max_abs_diff = 0.0;  // worst |E_xy − Σw_xy − loss_xy| over image pairs
  bool passed = false;
};

inline constexpr std::size_t kEquivalenceMaxImages = 4;
inline constexpr std::size_t kEquivalenceMaxPixels = 64;

// Builds the pixel graph of the whole dataset and compares its Potts energy
// with the summed pairwise loss. Datasets over 4 images or 8×8 features are refused.
EquivalenceReport equivalence_check(const std::vector<FeatureMap>& dataset, const HeadParams& head,
                                    double b, double tolerance);

}  // namespace corrdistill
