#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "corrdistill/tensor.hpp"

namespace corrdistill {

struct AdamConfig {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  std::uint64_t step = 0;
};

// Bias-corrected Adam update applied in place. The state is shaped lazily on
// the first call and must keep matching the parameter shapes afterwards.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
               AdamState& state, const AdamConfig& cfg);

// Single-tensor convenience overload.
void adam_step(Matrix& param, const Matrix& grad, AdamState& state, const AdamConfig& cfg);

}  // namespace corrdistill
