#pragma once

#include <cstddef>
#include <vector>

#include "grin/rng.hpp"

namespace grin {

// Dense rank-4 container in batch-channel-height-width layout, row-major
// with the batch index outermost. All numeric work is 64-bit.
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  int spatial() const { return h * w; }

  std::size_t index(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * c + j) * h + k) * w + l;
  }
  double& at(int i, int j, int k, int l) { return data[index(i, j, k, l)]; }
  double at(int i, int j, int k, int l) const { return data[index(i, j, k, l)]; }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

// Dense rank-2 container, row-major.
struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int rows_, int cols_, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  static Matrix identity(int dim);
};

// Row i of the result is the row-major flattening of instance i (N x CHW).
Matrix flatten_batch(const Tensor4& x);

// Inverse of flatten_batch for a matrix with rows == n and cols == c*h*w.
Tensor4 reshape_rows(const Matrix& m, int c, int h, int w);

// Standard product with 64-bit accumulation.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

// Pointwise ops. Shapes must match exactly.
Tensor4 add(const Tensor4& a, const Tensor4& b);
Tensor4 sub(const Tensor4& a, const Tensor4& b);
Tensor4 mul(const Tensor4& a, const Tensor4& b);
Tensor4 scale(const Tensor4& a, double factor);

// Broadcast ops apply one scalar per (instance, channel) across all spatial
// positions; the operand is shaped N x C.
Tensor4 broadcast_mul(const Tensor4& x, const Matrix& per_channel);
Tensor4 broadcast_add(const Tensor4& x, const Matrix& per_channel);

// Fill helpers used for initialization and tests.
void fill_normal(Tensor4& t, Rng& rng, double stdev);
void fill_normal(Matrix& m, Rng& rng, double stdev);
void fill_uniform(Tensor4& t, Rng& rng, double lo, double hi);
void fill_uniform(Matrix& m, Rng& rng, double lo, double hi);

// Throws NumericError if any element is NaN or infinite.
void require_finite(const Tensor4& t, const char* what);
void require_finite(const Matrix& m, const char* what);

}  // namespace grin
