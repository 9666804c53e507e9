#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "corrdistill/tensor.hpp"

namespace corrdistill {

/// Gaussian edge-potential parameters.
///   w = a·exp(−|Δp|²/2θα² − |ΔI|²/2θβ²) + b·exp(−|Δp|²/2θγ²) − negative_shift
/// Positions are in pixels. Colors arrive in [0,1] and are multiplied by
/// color_scale before the kernel, so θβ is expressed in 8-bit intensity units.
struct CrfParams {
  double a = 4.0;
  double b = 3.0;
  double theta_alpha = 67.0;
  double theta_beta = 3.0;
  double theta_gamma = 1.0;
  std::size_t iterations = 10;
  double negative_shift = 0.0;
  double color_scale = 255.0;
  std::size_t max_pixels = 128 * 128;

  void validate() const;
};

using Position = std::array<double, 2>;
using Color = std::array<double, 3>;

double crf_kernel(const Position& pos_i, const Position& pos_j, const Color& color_i,
                  const Color& color_j, const CrfParams& params);

/// Per-pixel class log-potentials, row-major pixels × classes.
struct UnaryField {
  std::size_t height = 0, width = 0, classes = 0;
  std::vector<double> data;

  UnaryField() = default;
  UnaryField(std::size_t h, std::size_t w, std::size_t k) : height(h), width(w), classes(k), data(h * w * k, 0.0) {}
  double& at(std::size_t pixel, std::size_t k) { return data[pixel * classes + k]; }
  double at(std::size_t pixel, std::size_t k) const { return data[pixel * classes + k]; }
};

inline constexpr double kUnaryTemperature = 0.1;

// log-softmax over cosine(code, centroid)/temperature. codes is K × (H·W).
UnaryField unary_from_codes(const Matrix& codes, std::size_t height, std::size_t width,
                            const Matrix& centroids, double temperature = kUnaryTemperature);

// Archive form: a classes × H × W feature map.
UnaryField unary_from_feature_map(const FeatureMap& map);
FeatureMap unary_to_feature_map(const UnaryField& unary);

struct MeanFieldResult {
  Matrix q;  // pixels × classes
  LabelMap labels;
};

// Exact dense mean field under Potts compatibility:
//   Q ← softmax(unary − Σ_{j≠i} w(i,j)·(1 − Q_j)),  Q⁰ = softmax(unary).
// The observer, when set, sees Q after every iteration.
MeanFieldResult meanfield_infer(const UnaryField& unary, const RgbImage& image, const CrfParams& params,
                                const std::function<void(std::size_t, const Matrix&)>& observer = {});
LabelMap meanfield_refine(const UnaryField& unary, const RgbImage& image, const CrfParams& params);

enum class CodeSpace { kDiscrete, kContinuous };

struct PottsSolveOptions {
  CodeSpace space = CodeSpace::kDiscrete;
  std::size_t dim = 2;  // labels for discrete, vector size for continuous
  std::size_t steps = 500;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  // Largest pixel count the dense pairwise matrix is built for.
  std::size_t max_pixels = 64 * 64;
};

struct PottsSolution {
  std::size_t height = 0, width = 0;
  Matrix codes;               // pixels × dim: softmax rows or unit vectors
  LabelMap labels;            // argmax per pixel
  std::vector<double> energy;  // relaxed energy before the first step and after each step
};

// Dense pairwise weights w(i,j) = crf_kernel − negative_shift, zero diagonal.
Matrix crf_weight_matrix(const RgbImage& image, const CrfParams& params);

// Relaxed energy Σ_{i≠j} w_ij·(1 − ⟨code_i, code_j⟩) of row codes.
double relaxed_potts_energy(const Matrix& weights, const Matrix& codes);

// Minimizes the shifted CRF energy without unaries. Each Adam proposal is
// backtracked (halving up to 20 times) until the energy does not increase;
// a proposal that never satisfies that is dropped.
PottsSolution unsupervised_potts_solve(const RgbImage& image, const CrfParams& params,
                                       const PottsSolveOptions& options);

// Visualization: the three highest-variance code dimensions mapped from [−1,1] to [0,1].
RgbImage codes_to_rgb(const PottsSolution& solution);

}  // namespace corrdistill
