#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "corrdistill/tensor.hpp"

namespace corrdistill {

/// Segmentation head: linear branch plus a two-layer ReLU MLP, summed.
///   s = W_lin·f + b_lin + W_out·relu(W_hid·f + b_hid) + b_out
/// Weights are stored output-major (rows = outputs); biases are single columns.
struct HeadParams {
  Matrix lin_weight;   // K × C
  Matrix lin_bias;     // K × 1
  Matrix hid_weight;   // C_h × C
  Matrix hid_bias;     // C_h × 1
  Matrix out_weight;   // K × C_h
  Matrix out_bias;     // K × 1

  // Bumped by every in-place update; forward caches remember it.
  std::uint64_t version = 0;

  static HeadParams zeros(std::size_t in_channels, std::size_t code_dim, std::size_t hidden);
  // Uniform in ±1/sqrt(fan_in), hidden width defaults to in_channels.
  static HeadParams init(std::size_t in_channels, std::size_t code_dim, std::uint64_t seed,
                         std::size_t hidden = 0);

  std::size_t in_channels() const { return static_cast<std::size_t>(lin_weight.cols()); }
  std::size_t code_dim() const { return static_cast<std::size_t>(lin_weight.rows()); }
  std::size_t hidden() const { return static_cast<std::size_t>(hid_weight.rows()); }

  std::array<Matrix*, 6> tensors();
  std::array<const Matrix*, 6> tensors() const;
  bool all_finite() const;
};

// Gradients mirror the parameter layout (version is unused).
using HeadGrads = HeadParams;

HeadGrads zeros_like(const HeadParams& p);
void accumulate(HeadGrads& into, const HeadGrads& other, double scale = 1.0);

/// Channel-wise inverted dropout: kept channels are scaled by 1/keep_prob.
struct DropoutMask {
  std::vector<std::uint8_t> keep;
  double keep_prob = 1.0;

  static DropoutMask all_keep(std::size_t channels, double keep_prob);
  static DropoutMask sample(std::size_t channels, double drop_prob, std::mt19937_64& rng);
};

struct HeadCache {
  Matrix input;        // C × N after dropout
  Matrix hidden_pre;   // C_h × N
  Matrix hidden_act;   // C_h × N
  std::optional<DropoutMask> mask;
  std::uint64_t params_version = 0;
  const HeadParams* params = nullptr;
};

struct HeadForward {
  Matrix codes;  // K × N
  HeadCache cache;
};

struct HeadBackward {
  HeadGrads params;
  Matrix input;  // dL/d(features before dropout), C × N
};

HeadForward head_forward(const Matrix& features, const HeadParams& params,
                         const DropoutMask* mask = nullptr);
FeatureMap head_forward(const FeatureMap& features, const HeadParams& params);

// Throws kContract when the cache came from a different or since-modified HeadParams.
HeadBackward head_backward(const Matrix& grad_codes, const HeadCache& cache,
                           const HeadParams& params);

/// Continuous sample coordinates (y, x) in [0,1]²; corners of the grid sit at 0 and 1.
struct SampledLocations {
  std::vector<std::array<double, 2>> yx;
  std::size_t size() const { return yx.size(); }
};

SampledLocations sample_locations(std::size_t n, std::mt19937_64& rng);
// Every pixel centre of an H×W grid in row-major order.
SampledLocations grid_locations(std::size_t height, std::size_t width);

// map is C × (H·W); returns C × n.
Matrix bilinear_sample(const Matrix& map, std::size_t height, std::size_t width,
                       const SampledLocations& locs);
// Scatters a C × n gradient back onto the C × (H·W) grid.
Matrix bilinear_sample_backward(const Matrix& grad_samples, std::size_t height, std::size_t width,
                                const SampledLocations& locs);

}  // namespace corrdistill
