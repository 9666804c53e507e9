#include <doctest.h>

#include <numeric>

#include "corrdistill/energy.hpp"
#include "test_util.hpp"

using namespace corrdistill;

namespace {

PixelGraph line_graph(std::size_t n, const Matrix& codes) {
  PixelGraph g;
  for (std::size_t i = 0; i < n; ++i) g.vertices.push_back({0, 0, i});
  g.weights = Matrix::Ones(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  g.codes = codes;
  return g;
}

}  // namespace

TEST_CASE("energy enumeration cases") {
  const Matrix same = Matrix::Constant(3, 2, 1.0 / std::sqrt(2.0));
  CHECK(potts_energy(line_graph(3, same), Compatibility::kCosineDistance) == doctest::Approx(0.0));

  const Matrix ortho = Matrix::Identity(2, 2);
  CHECK(potts_energy(line_graph(2, ortho), Compatibility::kCosineDistance) == doctest::Approx(2.0));

  PixelGraph labelled = line_graph(4, Matrix());
  labelled.labels = {1, 1, 1, 1};
  CHECK(potts_energy(labelled, Compatibility::kPottsIndicator) == 0.0);
  labelled.labels = {0, 1, 1, 1};
  CHECK(potts_energy(labelled, Compatibility::kPottsIndicator) == 6.0);
}

TEST_CASE("energy is invariant to vertex order") {
  std::mt19937_64 rng(1);
  PixelGraph g = line_graph(6, testutil::random_matrix(6, 3, rng));
  g.weights = testutil::random_matrix(6, 6, rng);
  std::vector<std::size_t> order(6);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  CHECK(potts_energy(permute_vertices(g, order), Compatibility::kCosineDistance) ==
        doctest::Approx(potts_energy(g, Compatibility::kCosineDistance)).epsilon(1e-12));
}

TEST_CASE("graph validation") {
  PixelGraph g = line_graph(3, Matrix::Ones(2, 2));
  CHECK_THROWS_AS(g.validate(), Error);
}

TEST_CASE("energy equals the summed loss on random datasets") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<FeatureMap> data = {testutil::random_map(4, 3, 3, rng), testutil::random_map(4, 3, 3, rng)};
    const HeadParams head = HeadParams::init(4, 3, seed);
    const auto r = equivalence_check(data, head, 0.2, 1e-5);
    CHECK(r.max_abs_diff < 1e-5);
    CHECK(r.passed);
  }
}

TEST_CASE("identical features with b = 0") {
  FeatureMap f(3, 2, 2);
  for (std::size_t p = 0; p < 4; ++p) f.at(0, p / 2, p % 2) = 1.0f;
  const HeadParams head = HeadParams::init(3, 2, 0);
  const auto r = equivalence_check({f, f}, head, 0.0, 1e-9);
  CHECK(r.loss_sum == doctest::Approx(-64.0));
  CHECK(r.energy == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(r.weight_sum == doctest::Approx(64.0));
  CHECK(r.passed);
}

TEST_CASE("single pixel dataset") {
  FeatureMap f(2, 1, 1);
  f.at(0, 0, 0) = 0.3f;
  f.at(1, 0, 0) = -0.4f;
  const HeadParams head = HeadParams::init(2, 2, 3);
  const auto r = equivalence_check({f}, head, 0.25, 1e-12);
  // One self pair: w = 1 − 0.25, μ = 0, loss = −(1 − 0.25)·1.
  CHECK(r.energy == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.weight_sum == doctest::Approx(0.75));
  CHECK(r.loss_sum == doctest::Approx(-0.75));
  CHECK(r.passed);
}

TEST_CASE("equivalence limits") {
  std::mt19937_64 rng(2);
  const HeadParams head = HeadParams::init(2, 2, 0);
  std::vector<FeatureMap> five(5, testutil::random_map(2, 2, 2, rng));
  CHECK_THROWS_AS(equivalence_check(five, head, 0.0, 1e-5), Error);
  CHECK_THROWS_AS(equivalence_check({testutil::random_map(2, 9, 9, rng)}, head, 0.0, 1e-5), Error);
}
