#include <doctest.h>

#include "corrdistill/adam.hpp"

using namespace corrdistill;

TEST_CASE("first step moves by about the learning rate") {
  Matrix p = Matrix::Constant(1, 1, 2.0);
  AdamState s;
  adam_step(p, Matrix::Constant(1, 1, 1.0), s, AdamConfig{0.01});
  CHECK(p(0, 0) == doctest::Approx(2.0 - 0.01).epsilon(1e-6));
  CHECK(s.step == 1);
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  Matrix p = Matrix::Random(3, 2);
  const Matrix start = p;
  AdamState s;
  for (int i = 0; i < 100; ++i) adam_step(p, Matrix::Zero(3, 2), s, AdamConfig{});
  CHECK(p == start);
}

TEST_CASE("quadratic bowl converges") {
  Matrix theta = Matrix::Constant(1, 1, 1.0);
  AdamState s;
  for (int i = 0; i < 1000; ++i) adam_step(theta, Matrix(2.0 * theta), s, AdamConfig{0.01});
  CHECK(std::abs(theta(0, 0)) < 1e-3);
}

TEST_CASE("shape mismatch is a dimension error") {
  Matrix p = Matrix::Zero(2, 2);
  AdamState s;
  adam_step(p, Matrix::Ones(2, 2), s, AdamConfig{});
  Matrix q = Matrix::Zero(3, 2);
  try {
    adam_step(q, Matrix::Ones(3, 2), s, AdamConfig{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDimension);
  }
  Matrix r = Matrix::Zero(2, 2);
  AdamState fresh;
  CHECK_THROWS_AS(adam_step(r, Matrix::Ones(2, 3), fresh, AdamConfig{}), Error);
}
