#include <array>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "doctest.h"
#include "grin/errors.hpp"
#include "grin/rng.hpp"
#include "grin/tensor.hpp"

using namespace grin;

TEST_CASE("flatten_batch lays out instances as rows") {
  Tensor4 x(2, 1, 1, 2);
  x.data = {1, 2, 3, 4};
  const Matrix m = flatten_batch(x);
  REQUIRE(m.rows == 2);
  REQUIRE(m.cols == 2);
  CHECK(m.at(0, 0) == 1);
  CHECK(m.at(0, 1) == 2);
  CHECK(m.at(1, 0) == 3);
  CHECK(m.at(1, 1) == 4);
}

TEST_CASE("flatten_batch of one instance preserves element order") {
  Tensor4 x(1, 3, 2, 2);
  for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = static_cast<double>(i) + 1;
  const Matrix m = flatten_batch(x);
  REQUIRE(m.rows == 1);
  REQUIRE(m.cols == 12);
  for (int j = 0; j < 12; ++j) CHECK(m.at(0, j) == j + 1);
}

TEST_CASE("flatten_batch matches per-index arithmetic on a random tensor") {
  Rng rng(21);
  Tensor4 x(4, 3, 5, 5);
  fill_uniform(x, rng, -2.0, 2.0);
  const Matrix m = flatten_batch(x);
  for (int n = 0; n < 4; ++n) {
    for (int c = 0; c < 3; ++c) {
      for (int h = 0; h < 5; ++h) {
        for (int w = 0; w < 5; ++w) {
          REQUIRE(m.at(n, (c * 5 + h) * 5 + w) == x.at(n, c, h, w));
        }
      }
    }
  }
}

TEST_CASE("flatten then reshape is the identity") {
  Rng rng(22);
  for (const auto [n, c, h, w] : {std::array{1, 1, 1, 1}, std::array{3, 2, 4, 5},
                                  std::array{2, 8, 3, 3}}) {
    Tensor4 x(n, c, h, w);
    fill_normal(x, rng, 1.0);
    const Tensor4 back = reshape_rows(flatten_batch(x), c, h, w);
    REQUIRE(back.same_shape(x));
    REQUIRE(back.data == x.data);
  }
}

TEST_CASE("matmul identity and forced arithmetic") {
  Rng rng(23);
  Matrix m(3, 4);
  fill_uniform(m, rng, -1.0, 1.0);
  const Matrix im = matmul(Matrix::identity(3), m);
  for (std::size_t i = 0; i < m.size(); ++i) REQUIRE(im.data[i] == m.data[i]);

  Matrix a(2, 2);
  a.data = {1, 2, 3, 4};
  Matrix b(2, 1);
  b.data = {0, 1};
  const Matrix p = matmul(a, b);
  CHECK(p.at(0, 0) == 2);
  CHECK(p.at(1, 0) == 4);
}

TEST_CASE("matmul matches the triple-loop oracle") {
  Rng rng(24);
  Matrix a(7, 5), b(5, 3);
  fill_uniform(a, rng, -1.0, 1.0);
  fill_uniform(b, rng, -1.0, 1.0);
  const Matrix p = matmul(a, b);
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 5; ++k) acc += a.at(i, k) * b.at(k, j);
      REQUIRE(p.at(i, j) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("matmul dimension mismatch throws") {
  Matrix a(2, 3), b(4, 2);
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("matmul is associative within float tolerance") {
  Rng rng(25);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix a(4, 6), b(6, 3), c(3, 5);
    fill_uniform(a, rng, -1.0, 1.0);
    fill_uniform(b, rng, -1.0, 1.0);
    fill_uniform(c, rng, -1.0, 1.0);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) {
      const double scale = std::max(1.0, std::abs(left.data[i]));
      REQUIRE(std::abs(left.data[i] - right.data[i]) / scale < 1e-9);
    }
  }
}

TEST_CASE("elementwise identities") {
  Rng rng(26);
  Tensor4 x(2, 3, 4, 4);
  fill_normal(x, rng, 2.0);
  const Tensor4 zero(2, 3, 4, 4, 0.0);
  const Tensor4 sum = add(x, zero);
  const Tensor4 scaled = scale(x, 1.0);
  REQUIRE(sum.data == x.data);
  REQUIRE(scaled.data == x.data);

  const Tensor4 diff = sub(x, x);
  for (double v : diff.data) REQUIRE(v == 0.0);
}

TEST_CASE("elementwise shape mismatch throws") {
  Tensor4 a(1, 2, 2, 2), b(1, 2, 2, 3);
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(mul(a, b), ShapeError);
}

TEST_CASE("broadcast ops apply one scalar per instance-channel") {
  Rng rng(27);
  Tensor4 x(3, 4, 2, 5);
  fill_uniform(x, rng, -1.0, 1.0);
  Matrix per(3, 4);
  fill_uniform(per, rng, 0.5, 1.5);
  const Tensor4 prod = broadcast_mul(x, per);
  const Tensor4 shifted = broadcast_add(x, per);
  for (int n = 0; n < 3; ++n) {
    for (int c = 0; c < 4; ++c) {
      for (int h = 0; h < 2; ++h) {
        for (int w = 0; w < 5; ++w) {
          REQUIRE(prod.at(n, c, h, w) == x.at(n, c, h, w) * per.at(n, c));
          REQUIRE(shifted.at(n, c, h, w) == x.at(n, c, h, w) + per.at(n, c));
        }
      }
    }
  }
  Matrix wrong(3, 5);
  CHECK_THROWS_AS(broadcast_mul(x, wrong), ShapeError);
}

TEST_CASE("require_finite rejects NaN and infinity") {
  Tensor4 x(1, 1, 1, 2, 1.0);
  CHECK_NOTHROW(require_finite(x, "x"));
  x.data[1] = std::nan("");
  CHECK_THROWS_AS(require_finite(x, "x"), NumericError);
  Matrix m(1, 1, 1.0);
  m.data[0] = HUGE_VAL;
  CHECK_THROWS_AS(require_finite(m, "m"), NumericError);
}

TEST_CASE("transpose flips indices") {
  Rng rng(28);
  Matrix m(3, 5);
  fill_uniform(m, rng, -1.0, 1.0);
  const Matrix t = transpose(m);
  REQUIRE(t.rows == 5);
  REQUIRE(t.cols == 3);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 5; ++c) REQUIRE(t.at(c, r) == m.at(r, c));
  }
}
