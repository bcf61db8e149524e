#include "grin/tensor.hpp"

#include <cmath>
#include <sstream>

#include "grin/errors.hpp"

namespace grin {

namespace {

void check_dims(int n, int c, int h, int w) {
  if (n < 1 || c < 1 || h < 1 || w < 1) {
    std::ostringstream os;
    os << "Tensor4 dimensions must all be >= 1, got (" << n << "," << c << "," << h << "," << w
       << ")";
    throw ShapeError(os.str());
  }
}

std::string shape_str(const Tensor4& t) {
  std::ostringstream os;
  os << "(" << t.n << "," << t.c << "," << t.h << "," << t.w << ")";
  return os.str();
}

}  // namespace

Tensor4::Tensor4(int n_, int c_, int h_, int w_, double fill) : n(n_), c(c_), h(h_), w(w_) {
  check_dims(n_, c_, h_, w_);
  data.assign(static_cast<std::size_t>(n) * c * h * w, fill);
}

Matrix::Matrix(int rows_, int cols_, double fill) : rows(rows_), cols(cols_) {
  if (rows < 1 || cols < 1) {
    std::ostringstream os;
    os << "Matrix dimensions must be >= 1, got (" << rows << "," << cols << ")";
    throw ShapeError(os.str());
  }
  data.assign(static_cast<std::size_t>(rows) * cols, fill);
}

Matrix Matrix::identity(int dim) {
  Matrix m(dim, dim, 0.0);
  for (int i = 0; i < dim; ++i) m.at(i, i) = 1.0;
  return m;
}

Matrix flatten_batch(const Tensor4& x) {
  Matrix m(x.n, x.c * x.h * x.w);
  m.data = x.data;  // layout is already batch-outermost row-major
  return m;
}

Tensor4 reshape_rows(const Matrix& m, int c, int h, int w) {
  if (static_cast<std::size_t>(c) * h * w != static_cast<std::size_t>(m.cols)) {
    std::ostringstream os;
    os << "reshape_rows: " << m.cols << " columns cannot reshape to (" << c << "," << h << ","
       << w << ")";
    throw ShapeError(os.str());
  }
  Tensor4 t(m.rows, c, h, w);
  t.data = m.data;
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    std::ostringstream os;
    os << "matmul: inner dimensions differ, (" << a.rows << "x" << a.cols << ") * (" << b.rows
       << "x" << b.cols << ")";
    throw ShapeError(os.str());
  }
  Matrix out(a.rows, b.cols, 0.0);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      const double* brow = &b.data[static_cast<std::size_t>(k) * b.cols];
      double* orow = &out.data[static_cast<std::size_t>(i) * out.cols];
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  require_finite(out, "matmul");
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols, m.rows);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out.at(c, r) = m.at(r, c);
  return out;
}

namespace {

void check_same_shape(const Tensor4& a, const Tensor4& b, const char* op) {
  if (!a.same_shape(b)) {
    std::ostringstream os;
    os << op << ": shape mismatch " << shape_str(a) << " vs " << shape_str(b);
    throw ShapeError(os.str());
  }
}

void check_broadcast(const Tensor4& x, const Matrix& m, const char* op) {
  if (m.rows != x.n || m.cols != x.c) {
    std::ostringstream os;
    os << op << ": broadcast operand must be " << x.n << "x" << x.c << ", got " << m.rows << "x"
       << m.cols;
    throw ShapeError(os.str());
  }
}

}  // namespace

Tensor4 add(const Tensor4& a, const Tensor4& b) {
  check_same_shape(a, b, "add");
  Tensor4 out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
  require_finite(out, "add");
  return out;
}

Tensor4 sub(const Tensor4& a, const Tensor4& b) {
  check_same_shape(a, b, "sub");
  Tensor4 out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
  require_finite(out, "sub");
  return out;
}

Tensor4 mul(const Tensor4& a, const Tensor4& b) {
  check_same_shape(a, b, "mul");
  Tensor4 out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
  require_finite(out, "mul");
  return out;
}

Tensor4 scale(const Tensor4& a, double factor) {
  Tensor4 out = a;
  for (double& v : out.data) v *= factor;
  require_finite(out, "scale");
  return out;
}

Tensor4 broadcast_mul(const Tensor4& x, const Matrix& per_channel) {
  check_broadcast(x, per_channel, "broadcast_mul");
  Tensor4 out = x;
  const int hw = x.spatial();
  for (int i = 0; i < x.n; ++i) {
    for (int j = 0; j < x.c; ++j) {
      const double f = per_channel.at(i, j);
      double* plane = &out.data[out.index(i, j, 0, 0)];
      for (int s = 0; s < hw; ++s) plane[s] *= f;
    }
  }
  require_finite(out, "broadcast_mul");
  return out;
}

Tensor4 broadcast_add(const Tensor4& x, const Matrix& per_channel) {
  check_broadcast(x, per_channel, "broadcast_add");
  Tensor4 out = x;
  const int hw = x.spatial();
  for (int i = 0; i < x.n; ++i) {
    for (int j = 0; j < x.c; ++j) {
      const double f = per_channel.at(i, j);
      double* plane = &out.data[out.index(i, j, 0, 0)];
      for (int s = 0; s < hw; ++s) plane[s] += f;
    }
  }
  require_finite(out, "broadcast_add");
  return out;
}

void fill_normal(Tensor4& t, Rng& rng, double stdev) {
  for (double& v : t.data) v = rng.normal(0.0, stdev);
}

void fill_normal(Matrix& m, Rng& rng, double stdev) {
  for (double& v : m.data) v = rng.normal(0.0, stdev);
}

void fill_uniform(Tensor4& t, Rng& rng, double lo, double hi) {
  for (double& v : t.data) v = rng.uniform(lo, hi);
}

void fill_uniform(Matrix& m, Rng& rng, double lo, double hi) {
  for (double& v : m.data) v = rng.uniform(lo, hi);
}

namespace {

void require_finite_span(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      std::ostringstream os;
      os << what << ": produced a non-finite value";
      throw NumericError(os.str());
    }
  }
}

}  // namespace

void require_finite(const Tensor4& t, const char* what) { require_finite_span(t.data, what); }
void require_finite(const Matrix& m, const char* what) { require_finite_span(m.data, what); }

}  // namespace grin
