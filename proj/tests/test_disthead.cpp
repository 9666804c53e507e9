#include <doctest.h>

#include "corrdistill/disthead.hpp"
#include "test_util.hpp"

using namespace corrdistill;
using testutil::numeric_gradient;
using testutil::relative_error;

TEST_CASE("zero head gives zero codes") {
  std::mt19937_64 rng(1);
  const HeadParams p = HeadParams::zeros(4, 3, 5);
  const auto out = head_forward(testutil::random_matrix(4, 7, rng), p);
  CHECK(out.codes.isZero(0.0));
}

TEST_CASE("identity linear branch passes features through") {
  std::mt19937_64 rng(2);
  HeadParams p = HeadParams::zeros(4, 4, 4);
  p.lin_weight = Matrix::Identity(4, 4);
  const Matrix f = testutil::random_matrix(4, 6, rng);
  CHECK((head_forward(f, p).codes - f).norm() < 1e-14);
}

TEST_CASE("inverted dropout scaling") {
  std::mt19937_64 rng(3);
  HeadParams p = HeadParams::init(5, 3, 7);
  p.lin_bias.setZero();
  p.hid_weight.setZero();
  p.hid_bias.setZero();
  p.out_bias.setZero();
  const Matrix f = testutil::random_matrix(5, 4, rng);
  const DropoutMask mask = DropoutMask::all_keep(5, 0.9);
  const Matrix with = head_forward(f, p, &mask).codes;
  const Matrix without = head_forward(f, p).codes;
  CHECK((with - without / 0.9).norm() < 1e-12);
}

TEST_CASE("dropout mask statistics") {
  std::mt19937_64 rng(4);
  std::size_t kept = 0;
  for (int i = 0; i < 200; ++i) {
    const DropoutMask m = DropoutMask::sample(100, 0.1, rng);
    CHECK(m.keep_prob == doctest::Approx(0.9));
    for (auto k : m.keep) kept += k;
  }
  CHECK(kept / 20000.0 == doctest::Approx(0.9).epsilon(0.01));
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  std::mt19937_64 rng(5);
  const HeadParams p = HeadParams::init(4, 3, 1);
  const auto fwd = head_forward(testutil::random_matrix(4, 5, rng), p);
  const auto back = head_backward(Matrix::Zero(3, 5), fwd.cache, p);
  for (const Matrix* g : back.params.tensors()) CHECK(g->isZero(0.0));
  CHECK(back.input.isZero(0.0));
}

TEST_CASE("scalar network by hand") {
  HeadParams p = HeadParams::zeros(1, 1, 1);
  p.lin_weight(0, 0) = 0.5;
  p.lin_bias(0, 0) = 0.1;
  p.hid_weight(0, 0) = 2.0;
  p.hid_bias(0, 0) = -0.5;
  p.out_weight(0, 0) = 3.0;
  p.out_bias(0, 0) = 0.2;
  Matrix f(1, 1);
  f(0, 0) = 1.5;
  const auto fwd = head_forward(f, p);
  // s = 0.5·1.5 + 0.1 + 3·relu(2·1.5 − 0.5) + 0.2 = 0.85 + 7.5 + 0.2
  CHECK(fwd.codes(0, 0) == doctest::Approx(8.55));
  const auto back = head_backward(Matrix::Constant(1, 1, 2.0), fwd.cache, p);
  CHECK(back.params.lin_weight(0, 0) == doctest::Approx(2.0 * 1.5));
  CHECK(back.params.lin_bias(0, 0) == doctest::Approx(2.0));
  CHECK(back.params.out_weight(0, 0) == doctest::Approx(2.0 * 2.5));
  CHECK(back.params.out_bias(0, 0) == doctest::Approx(2.0));
  CHECK(back.params.hid_weight(0, 0) == doctest::Approx(2.0 * 3.0 * 1.5));
  CHECK(back.params.hid_bias(0, 0) == doctest::Approx(2.0 * 3.0));
  CHECK(back.input(0, 0) == doctest::Approx(2.0 * (0.5 + 3.0 * 2.0)));
}

TEST_CASE("head gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed + 100);
    const HeadParams p = HeadParams::init(4, 3, seed, 5);
    const Matrix f = testutil::random_matrix(4, 6, rng);
    const Matrix g = testutil::random_matrix(3, 6, rng);
    const auto fwd = head_forward(f, p);
    const auto back = head_backward(g, fwd.cache, p);
    for (std::size_t t = 0; t < 6; ++t) {
      auto objective = [&](const Matrix& x) {
        HeadParams q = p;
        *q.tensors()[t] = x;
        return (head_forward(f, q).codes.array() * g.array()).sum();
      };
      CHECK(relative_error(*back.params.tensors()[t], numeric_gradient(objective, *p.tensors()[t])) < 1e-4);
    }
    auto by_input = [&](const Matrix& x) { return (head_forward(x, p).codes.array() * g.array()).sum(); };
    CHECK(relative_error(back.input, numeric_gradient(by_input, f)) < 1e-4);
  }
}

TEST_CASE("stale cache is rejected") {
  std::mt19937_64 rng(6);
  HeadParams p = HeadParams::init(3, 2, 0);
  const auto fwd = head_forward(testutil::random_matrix(3, 2, rng), p);
  ++p.version;
  CHECK_THROWS_AS(head_backward(Matrix::Ones(2, 2), fwd.cache, p), Error);
  HeadParams other = HeadParams::init(3, 2, 0);
  CHECK_THROWS_AS(head_backward(Matrix::Ones(2, 2), fwd.cache, other), Error);
}

TEST_CASE("bilinear sampling identities") {
  std::mt19937_64 rng(7);
  const Matrix map = testutil::random_matrix(3, 12, rng);  // 3 × (3·4)
  SampledLocations on_grid;
  on_grid.yx = {{0.5, 1.0 / 3.0}, {0.0, 0.0}, {1.0, 1.0}};
  const Matrix s = bilinear_sample(map, 3, 4, on_grid);
  CHECK((s.col(0) - map.col(1 * 4 + 1)).norm() < 1e-12);
  CHECK((s.col(1) - map.col(0)).norm() < 1e-12);
  CHECK((s.col(2) - map.col(11)).norm() < 1e-12);

  Matrix pair(2, 2);
  pair << 1, 3, -2, 6;
  SampledLocations mid;
  mid.yx = {{0.0, 0.5}};
  const Matrix m = bilinear_sample(pair, 1, 2, mid);
  CHECK(m(0, 0) == doctest::Approx(2.0));
  CHECK(m(1, 0) == doctest::Approx(2.0));

  const Matrix constant = Matrix::Constant(2, 20, 1.25);
  const Matrix c = bilinear_sample(constant, 4, 5, sample_locations(30, rng));
  CHECK((c.array() - 1.25).abs().maxCoeff() < 1e-12);

  const SampledLocations grid = grid_locations(3, 4);
  CHECK((bilinear_sample(map, 3, 4, grid) - map).norm() < 1e-12);
}

TEST_CASE("bilinear backward matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const Matrix map = testutil::random_matrix(2, 20, rng);
    const SampledLocations locs = sample_locations(9, rng);
    const Matrix g = testutil::random_matrix(2, 9, rng);
    auto objective = [&](const Matrix& x) { return (bilinear_sample(x, 4, 5, locs).array() * g.array()).sum(); };
    CHECK(relative_error(bilinear_sample_backward(g, 4, 5, locs), numeric_gradient(objective, map)) < 1e-4);
  }
}

TEST_CASE("init is seeded and bounded") {
  const HeadParams a = HeadParams::init(9, 4, 3);
  const HeadParams b = HeadParams::init(9, 4, 3);
  CHECK(a.lin_weight == b.lin_weight);
  CHECK(a.hidden() == 9);
  CHECK(a.lin_weight.cwiseAbs().maxCoeff() <= 1.0 / 3.0);
  CHECK(a.all_finite());
}
