#include "corrdistill/adam.hpp"

#include <cmath>

namespace corrdistill {

void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size())
    throw Error(ErrorCode::kDimension, "adam_step: parameter and gradient counts differ");
  if (state.step == 0 && state.first.empty()) {
    for (const Matrix* p : params) {
      state.first.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.second.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.first.size() != params.size())
    throw Error(ErrorCode::kDimension, "adam_step: optimizer state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i]->rows() || params[i]->cols() != grads[i]->cols() ||
        state.first[i].rows() != params[i]->rows() || state.first[i].cols() != params[i]->cols())
      throw Error(ErrorCode::kDimension, "adam_step: shape mismatch");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& m = state.first[i];
    Matrix& v = state.second[i];
    const Matrix& g = *grads[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
    const auto m_hat = m.array() / correction1;
    const auto v_hat = v.array() / correction2;
    params[i]->array() -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
  }
}

void adam_step(Matrix& param, const Matrix& grad, AdamState& state, const AdamConfig& cfg) {
  Matrix* const p[] = {&param};
  const Matrix* const g[] = {&grad};
  adam_step(std::span<Matrix* const>(p), std::span<const Matrix* const>(g), state, cfg);
}

}  // namespace corrdistill
