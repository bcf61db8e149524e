#include "grin/losses.hpp"

#include <sstream>

#include "grin/errors.hpp"
#include "grin/stats.hpp"

namespace grin {

namespace {

double sum_sq_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

}  // namespace

double content_loss(const Tensor4& reencoded_t, const Tensor4& t, bool mean_reduce) {
  if (!reencoded_t.same_shape(t)) {
    std::ostringstream os;
    os << "content_loss: shapes differ, (" << reencoded_t.n << "," << reencoded_t.c << ","
       << reencoded_t.h << "," << reencoded_t.w << ") vs (" << t.n << "," << t.c << "," << t.h
       << "," << t.w << ")";
    throw ShapeError(os.str());
  }
  double loss = sum_sq_diff(reencoded_t.data, t.data);
  if (mean_reduce) loss /= static_cast<double>(t.size());
  return loss;
}

std::pair<double, std::vector<double>> style_loss(const std::vector<Tensor4>& output_feats,
                                                  const std::vector<Tensor4>& style_feats,
                                                  double eps, bool mean_reduce) {
  if (output_feats.size() != style_feats.size()) {
    std::ostringstream os;
    os << "style_loss: " << output_feats.size() << " output layers vs " << style_feats.size()
       << " style layers";
    throw ShapeError(os.str());
  }
  if (output_feats.empty()) throw ShapeError("style_loss: at least one layer is required");

  std::vector<double> per_layer;
  double total = 0.0;
  for (std::size_t i = 0; i < output_feats.size(); ++i) {
    const Tensor4& out = output_feats[i];
    const Tensor4& sty = style_feats[i];
    if (out.n != sty.n || out.c != sty.c) {
      std::ostringstream os;
      os << "style_loss: layer " << i << " has N=" << out.n << " C=" << out.c
         << " in the output but N=" << sty.n << " C=" << sty.c << " in the style";
      throw ShapeError(os.str());
    }
    const ChannelStats so = compute_stats(out, eps);
    const ChannelStats ss = compute_stats(sty, eps);
    double layer = sum_sq_diff(so.mean.data, ss.mean.data) + sum_sq_diff(so.std.data, ss.std.data);
    if (mean_reduce) layer /= static_cast<double>(so.mean.size());
    per_layer.push_back(layer);
    total += layer;
  }
  return {total, per_layer};
}

double total_loss(double content, double style, const LossWeights& w) {
  if (content < 0.0 || style < 0.0) throw GrinError("total_loss: components must be >= 0");
  if (w.lambda < 0.0) throw GrinError("total_loss: lambda must be >= 0");
  return content + w.lambda * style;
}

}  // namespace grin
