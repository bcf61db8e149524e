#include "grin/stats.hpp"

#include <cmath>
#include <sstream>

#include "grin/errors.hpp"

namespace grin {

ChannelStats compute_stats(const Tensor4& x, double eps) {
  if (eps <= 0.0) throw GrinError("compute_stats: eps must be > 0");
  ChannelStats s;
  s.eps = eps;
  s.mean = Matrix(x.n, x.c);
  s.std = Matrix(x.n, x.c);
  const int hw = x.spatial();
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      const double* plane = &x.data[x.index(n, c, 0, 0)];
      double sum = 0.0;
      for (int i = 0; i < hw; ++i) sum += plane[i];
      const double mean = sum / hw;
      double var = 0.0;
      for (int i = 0; i < hw; ++i) {
        const double d = plane[i] - mean;
        var += d * d;
      }
      var /= hw;
      s.mean.at(n, c) = mean;
      s.std.at(n, c) = std::sqrt(var + eps);
    }
  }
  return s;
}

Tensor4 whiten(const Tensor4& x, const ChannelStats& stats) {
  if (stats.mean.rows != x.n || stats.mean.cols != x.c || !stats.mean.same_shape(stats.std)) {
    std::ostringstream os;
    os << "whiten: stats shaped " << stats.mean.rows << "x" << stats.mean.cols
       << " do not match tensor with N=" << x.n << " C=" << x.c;
    throw ShapeError(os.str());
  }
  Tensor4 out = x;
  const int hw = x.spatial();
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      const double mean = stats.mean.at(n, c);
      const double inv = 1.0 / stats.std.at(n, c);
      double* plane = &out.data[out.index(n, c, 0, 0)];
      for (int i = 0; i < hw; ++i) plane[i] = (plane[i] - mean) * inv;
    }
  }
  return out;
}

}  // namespace grin
