#include <doctest.h>

#include "corrdistill/corrloss.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace corrdistill;
using testutil::numeric_gradient;
using testutil::random_matrix;
using testutil::relative_error;

TEST_CASE("single pair value") {
  // F = 0.8 (columns at angle acos 0.8), b = 0.3 → F − b = 0.5; S = 0.7.
  Matrix f(2, 1), g(2, 1), s(2, 1), t(2, 1);
  f << 1, 0;
  g << 0.8, 0.6;
  s << 1, 0;
  t << 0.7, std::sqrt(1 - 0.49);
  CHECK(simple_corr_loss(f, g, s, t, 0.3).value == doctest::Approx(-0.35));
}

TEST_CASE("vanishing coefficient gives zero gradient") {
  Matrix f(2, 1), g(2, 1);
  f << 1, 0;
  g << 0.6, 0.8;
  std::mt19937_64 rng(1);
  const auto out = simple_corr_loss(f, g, random_matrix(3, 1, rng), random_matrix(3, 1, rng), 0.6);
  CHECK(out.value == doctest::Approx(0.0));
  CHECK(out.grad_s.norm() < 1e-15);
  CHECK(out.grad_t.norm() < 1e-15);
}

TEST_CASE("negative code similarity is clamped") {
  Matrix f(2, 1), g(2, 1), s(2, 1), t(2, 1);
  f << 1, 0;
  g << 1, 0;
  s << 1, 0;
  t << -0.3, std::sqrt(1 - 0.09);
  LossConfig cfg;
  cfg.spatial_center = false;
  const auto out = corr_loss(f, g, s, t, 0.0, cfg);
  CHECK(out.value == doctest::Approx(0.0));
  CHECK(out.grad_s.norm() == 0.0);
  CHECK(out.grad_t.norm() == 0.0);
}

TEST_CASE("centering removes a constant correspondence") {
  // Every feature identical → F ≡ 1 → F^SC − b = −b.
  Matrix f = Matrix::Ones(3, 4), g = Matrix::Ones(3, 5);
  std::mt19937_64 rng(2);
  const Matrix s = random_matrix(2, 4, rng), t = random_matrix(2, 5, rng);
  LossConfig cfg;
  cfg.zero_clamp = false;
  const double b = 0.25;
  const double sum_s = (normalize_columns(s).transpose() * normalize_columns(t)).sum();
  CHECK(corr_loss(f, g, s, t, b, cfg).value == doctest::Approx(b * sum_s));
}

TEST_CASE("loss gradients match finite differences for every flag combination") {
  for (int flags = 0; flags < 4; ++flags) {
    LossConfig cfg;
    cfg.spatial_center = (flags & 1) != 0;
    cfg.zero_clamp = (flags & 2) != 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      std::mt19937_64 rng(seed * 31 + static_cast<std::uint64_t>(flags));
      const Matrix f = random_matrix(5, 6, rng), g = random_matrix(5, 7, rng);
      const Matrix s = random_matrix(3, 6, rng), t = random_matrix(3, 7, rng);
      const auto out = corr_loss(f, g, s, t, 0.2, cfg);
      CHECK(relative_error(out.grad_s, numeric_gradient([&](const Matrix& x) { return corr_loss(f, g, x, t, 0.2, cfg).value; }, s)) < 1e-4);
      CHECK(relative_error(out.grad_t, numeric_gradient([&](const Matrix& x) { return corr_loss(f, g, s, x, 0.2, cfg).value; }, t)) < 1e-4);
    }
  }
}

TEST_CASE("sampled loss on the full grid equals the dense computation") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    std::mt19937_64 rng(seed);
    const FeatureMap f = testutil::random_map(6, 3, 4, rng), g = testutil::random_map(6, 4, 3, rng);
    const FeatureMap s = testutil::random_map(4, 3, 4, rng), t = testutil::random_map(4, 4, 3, rng);
    const auto gl_src = grid_locations(3, 4), gl_tgt = grid_locations(4, 3);
    for (int flags = 0; flags < 4; ++flags) {
      LossConfig cfg;
      cfg.spatial_center = (flags & 1) != 0;
      cfg.zero_clamp = (flags & 2) != 0;
      const double sampled =
          corr_loss(bilinear_sample(f.as_matrix(), 3, 4, gl_src), bilinear_sample(g.as_matrix(), 4, 3, gl_tgt),
                    bilinear_sample(s.as_matrix(), 3, 4, gl_src), bilinear_sample(t.as_matrix(), 4, 3, gl_tgt), 0.15, cfg)
              .value;
      CHECK(std::abs(sampled - oracle::dense_corr_loss(f, g, s, t, 0.15, cfg.spatial_center, cfg.zero_clamp)) < 1e-5);
    }
  }
}

TEST_CASE("presets") {
  const LossConfig c = LossConfig::cocostuff();
  CHECK(c.lambda_rand == 0.15);
  CHECK(c.lambda_knn == 1.00);
  CHECK(c.lambda_self == 0.10);
  CHECK(c.b_rand == 1.00);
  CHECK(c.b_knn == 0.20);
  CHECK(c.b_self == 0.12);
  const LossConfig y = LossConfig::cityscapes();
  CHECK(y.lambda_rand == 0.91);
  CHECK(y.lambda_knn == 0.58);
  CHECK(y.lambda_self == 1.00);
  CHECK(y.b_rand == 0.31);
  CHECK(y.b_knn == 0.18);
  CHECK(y.b_self == 0.46);
  LossConfig bad;
  bad.lambda_knn = -1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("full loss with only the self term") {
  std::mt19937_64 rng(5);
  const FeatureMap x = testutil::random_map(4, 5, 5, rng);
  const FeatureMap k = testutil::random_map(4, 5, 5, rng);
  const FeatureMap r = testutil::random_map(4, 5, 5, rng);
  const HeadParams head = HeadParams::init(4, 3, 2);
  LossConfig cfg;
  cfg.lambda_knn = 0;
  cfg.lambda_rand = 0;
  cfg.lambda_self = 0.7;

  std::mt19937_64 a(9), b(9);
  const auto full = full_loss(x, k, r, head, cfg, a);
  // Replay the location draws: self term first, then two unused terms.
  const auto src = sample_locations(cfg.n_locations, b);
  const auto tgt = sample_locations(cfg.n_locations, b);
  const Matrix codes = head_forward(x.as_matrix(), head).codes;
  const auto ref = corr_loss(bilinear_sample(x.as_matrix(), 5, 5, src), bilinear_sample(x.as_matrix(), 5, 5, tgt),
                             bilinear_sample(codes, 5, 5, src), bilinear_sample(codes, 5, 5, tgt), cfg.b_self, cfg);
  CHECK(full.value == doctest::Approx(0.7 * ref.value).epsilon(1e-12));
  CHECK(full.terms[1] == 0.0);
  CHECK(full.terms[2] == 0.0);
}

TEST_CASE("full loss head gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed + 40);
    const FeatureMap x = testutil::random_map(3, 4, 4, rng);
    const FeatureMap k = testutil::random_map(3, 4, 4, rng);
    const FeatureMap r = testutil::random_map(3, 4, 4, rng);
    const HeadParams head = HeadParams::init(3, 2, seed, 4);
    LossConfig cfg;
    cfg.n_locations = 9;
    cfg.b_knn = 0.1;
    cfg.b_rand = 0.3;
    std::mt19937_64 draw(seed);
    const auto out = full_loss(x, k, r, head, cfg, draw);
    for (std::size_t t = 0; t < 6; ++t) {
      auto objective = [&](const Matrix& m) {
        HeadParams q = head;
        *q.tensors()[t] = m;
        std::mt19937_64 replay(seed);
        return full_loss(x, k, r, q, cfg, replay).value;
      };
      CHECK(relative_error(*out.grads.tensors()[t], numeric_gradient(objective, *head.tensors()[t])) < 1e-4);
    }
  }
}
