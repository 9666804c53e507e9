#pragma once

#include <array>
#include <random>

#include "corrdistill/disthead.hpp"

namespace corrdistill {

struct LossConfig {
  // λ_self ≈ λ_rand ≈ 2·λ_knn. The zero shifts keep the mean random-pair code
  // similarity near 0 on the synthetic corpus.
  double lambda_self = 1.0;
  double lambda_knn = 0.5;
  double lambda_rand = 1.0;
  double b_self = 0.0;
  double b_knn = 0.0;
  double b_rand = 0.0;
  std::size_t n_locations = 121;
  bool zero_clamp = true;
  bool spatial_center = true;

  // Weights and shifts tuned for CocoStuff / Cityscapes.
  static LossConfig cocostuff();
  static LossConfig cityscapes();

  void validate() const;
};

struct LossOutput {
  double value = 0.0;
  Matrix grad_s;  // K × n (source codes)
  Matrix grad_t;  // K × m (target codes)
};

// Inputs are column-per-sample: f_s C×n, g_s C×m, s_s K×n, t_s K×m.
// value = −Σ_pq (F_pq − b)·S_pq with F, S cosine-similarity matrices.
LossOutput simple_corr_loss(const Matrix& f_s, const Matrix& g_s, const Matrix& s_s,
                            const Matrix& t_s, double b);

// value = −Σ_pq (F^SC_pq − b)·max(S_pq, 0); centering and clamping follow the
// cfg flags. With both flags off this is simple_corr_loss.
LossOutput corr_loss(const Matrix& f_s, const Matrix& g_s, const Matrix& s_s, const Matrix& t_s,
                     double b, const LossConfig& cfg);

enum class LossTerm : int { kSelf = 0, kKnn = 1, kRand = 2 };

struct FullLossOutput {
  double value = 0.0;
  std::array<double, 3> terms{};  // unweighted self / knn / rand values
  HeadGrads grads;
};

// One distillation triple. Each term draws fresh source/target locations.
// When drop_prob > 0 an independent channel-dropout mask is drawn for each
// head evaluation; correspondences of the backbone features never see dropout.
FullLossOutput full_loss(const FeatureMap& x, const FeatureMap& x_knn, const FeatureMap& x_rand,
                         const HeadParams& head, const LossConfig& cfg, std::mt19937_64& rng,
                         double drop_prob = 0.0);

}  // namespace corrdistill
