#include "grin/normalize.hpp"

#include <sstream>

#include "grin/errors.hpp"

namespace grin {

namespace {

void check_pair(const Tensor4& x, const Tensor4& y, const char* op) {
  if (x.n != y.n || x.c != y.c) {
    std::ostringstream os;
    os << op << ": content has N=" << x.n << " C=" << x.c << " but style has N=" << y.n
       << " C=" << y.c;
    throw ShapeError(os.str());
  }
}

}  // namespace

Tensor4 apply_scale_bias(const Tensor4& whitened, const Matrix& stdev, const Matrix& mean) {
  if (stdev.rows != whitened.n || stdev.cols != whitened.c || !stdev.same_shape(mean)) {
    std::ostringstream os;
    os << "apply_scale_bias: per-channel operands must be " << whitened.n << "x" << whitened.c;
    throw ShapeError(os.str());
  }
  Tensor4 out = whitened;
  const int hw = whitened.spatial();
  for (int n = 0; n < out.n; ++n) {
    for (int c = 0; c < out.c; ++c) {
      const double s = stdev.at(n, c);
      const double m = mean.at(n, c);
      double* plane = &out.data[out.index(n, c, 0, 0)];
      for (int i = 0; i < hw; ++i) plane[i] = plane[i] * s + m;
    }
  }
  return out;
}

Tensor4 adain(const Tensor4& x, const Tensor4& y, double eps) {
  check_pair(x, y, "adain");
  const ChannelStats sx = compute_stats(x, eps);
  const ChannelStats sy = compute_stats(y, eps);
  return apply_scale_bias(whiten(x, sx), sy.std, sy.mean);
}

Tensor4 grin(const Tensor4& x, const Tensor4& y, const GrinConfig& cfg) {
  if (cfg.mode == Mode::infer) return adain(x, y, cfg.eps);

  check_pair(x, y, "grin");
  if (cfg.stack == nullptr) throw ModeError("grin: train mode requires an initialized stack");
  const ChannelStats sx = compute_stats(x, cfg.eps);
  const ChannelStats sy = compute_stats(y, cfg.eps);
  const AdjacencyMatrix adj = build_adjacency(y, cfg.adjacency_variant, cfg.eps_degree);
  const Matrix smoothed = smooth_means(sy.mean, adj, *cfg.stack);
  return apply_scale_bias(whiten(x, sx), sy.std, smoothed);
}

}  // namespace grin
