#include "corrdistill/corrloss.hpp"

namespace corrdistill {

LossConfig LossConfig::cocostuff() {
  LossConfig cfg;
  cfg.lambda_rand = 0.15;
  cfg.lambda_knn = 1.00;
  cfg.lambda_self = 0.10;
  cfg.b_rand = 1.00;
  cfg.b_knn = 0.20;
  cfg.b_self = 0.12;
  return cfg;
}

LossConfig LossConfig::cityscapes() {
  LossConfig cfg;
  cfg.lambda_rand = 0.91;
  cfg.lambda_knn = 0.58;
  cfg.lambda_self = 1.00;
  cfg.b_rand = 0.31;
  cfg.b_knn = 0.18;
  cfg.b_self = 0.46;
  return cfg;
}

void LossConfig::validate() const {
  if (lambda_self < 0 || lambda_knn < 0 || lambda_rand < 0)
    throw Error(ErrorCode::kConfiguration, "loss weights must be nonnegative");
  if (lambda_self + lambda_knn + lambda_rand <= 0)
    throw Error(ErrorCode::kConfiguration, "at least one loss weight must be positive");
  if (n_locations == 0) throw Error(ErrorCode::kConfiguration, "n_locations must be positive");
}

LossOutput corr_loss(const Matrix& f_s, const Matrix& g_s, const Matrix& s_s, const Matrix& t_s,
                     double b, const LossConfig& cfg) {
  if (f_s.cols() != s_s.cols() || g_s.cols() != t_s.cols())
    throw Error(ErrorCode::kDimension, "corr_loss: sample counts differ between features and codes");
  if (f_s.rows() != g_s.rows() || s_s.rows() != t_s.rows())
    throw Error(ErrorCode::kDimension, "corr_loss: channel mismatch");

  Matrix feat_corr = normalize_columns(f_s).transpose() * normalize_columns(g_s);
  if (cfg.spatial_center) feat_corr.colwise() -= feat_corr.rowwise().mean();
  const Matrix coef = (feat_corr.array() - b).matrix();

  const Matrix s_unit = normalize_columns(s_s);
  const Matrix t_unit = normalize_columns(t_s);
  const Matrix code_corr = s_unit.transpose() * t_unit;

  LossOutput out;
  // dL/dS, with the clamp contributing nothing where S <= 0.
  Matrix grad_corr = -coef;
  if (cfg.zero_clamp) {
    const auto active = (code_corr.array() > 0.0).cast<double>();
    out.value = -(coef.array() * code_corr.array().max(0.0)).sum();
    grad_corr = (grad_corr.array() * active).matrix();
  } else {
    out.value = -(coef.array() * code_corr.array()).sum();
  }
  out.grad_s = normalize_columns_backward(s_s, t_unit * grad_corr.transpose());
  out.grad_t = normalize_columns_backward(t_s, s_unit * grad_corr);
  return out;
}

LossOutput simple_corr_loss(const Matrix& f_s, const Matrix& g_s, const Matrix& s_s,
                            const Matrix& t_s, double b) {
  LossConfig plain;
  plain.zero_clamp = false;
  plain.spatial_center = false;
  return corr_loss(f_s, g_s, s_s, t_s, b, plain);
}

FullLossOutput full_loss(const FeatureMap& x, const FeatureMap& x_knn, const FeatureMap& x_rand,
                         const HeadParams& head, const LossConfig& cfg, std::mt19937_64& rng,
                         double drop_prob) {
  cfg.validate();
  const std::array<const FeatureMap*, 3> maps = {&x, &x_knn, &x_rand};
  struct MapState {
    Matrix feats;
    HeadForward fwd;
    Matrix grad_codes;
  };
  std::array<MapState, 3> state;
  for (std::size_t m = 0; m < maps.size(); ++m) {
    state[m].feats = maps[m]->as_matrix();
    if (drop_prob > 0.0) {
      const DropoutMask mask = DropoutMask::sample(head.in_channels(), drop_prob, rng);
      state[m].fwd = head_forward(state[m].feats, head, &mask);
    } else {
      state[m].fwd = head_forward(state[m].feats, head);
    }
    state[m].grad_codes = Matrix::Zero(state[m].fwd.codes.rows(), state[m].fwd.codes.cols());
  }

  FullLossOutput out;
  const std::array<double, 3> lambdas = {cfg.lambda_self, cfg.lambda_knn, cfg.lambda_rand};
  const std::array<double, 3> shifts = {cfg.b_self, cfg.b_knn, cfg.b_rand};
  for (std::size_t term = 0; term < 3; ++term) {
    // Self pairs x with itself; the other terms pair x with the partner map.
    const std::size_t target = term;
    const FeatureMap& src_map = *maps[0];
    const FeatureMap& tgt_map = *maps[target];
    const SampledLocations src_locs = sample_locations(cfg.n_locations, rng);
    const SampledLocations tgt_locs = sample_locations(cfg.n_locations, rng);
    if (lambdas[term] == 0.0) continue;

    const Matrix f_s = bilinear_sample(state[0].feats, src_map.height, src_map.width, src_locs);
    const Matrix g_s = bilinear_sample(state[target].feats, tgt_map.height, tgt_map.width, tgt_locs);
    const Matrix s_s = bilinear_sample(state[0].fwd.codes, src_map.height, src_map.width, src_locs);
    const Matrix t_s = bilinear_sample(state[target].fwd.codes, tgt_map.height, tgt_map.width, tgt_locs);
    const LossOutput lo = corr_loss(f_s, g_s, s_s, t_s, shifts[term], cfg);

    out.terms[term] = lo.value;
    out.value += lambdas[term] * lo.value;
    state[0].grad_codes +=
        lambdas[term] * bilinear_sample_backward(lo.grad_s, src_map.height, src_map.width, src_locs);
    state[target].grad_codes +=
        lambdas[term] * bilinear_sample_backward(lo.grad_t, tgt_map.height, tgt_map.width, tgt_locs);
  }

  out.grads = zeros_like(head);
  for (std::size_t m = 0; m < 3; ++m) {
    if (state[m].grad_codes.isZero(0.0)) continue;
    accumulate(out.grads, head_backward(state[m].grad_codes, state[m].fwd.cache, head).params);
  }
  return out;
}

}  // namespace corrdistill
