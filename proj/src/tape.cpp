#include "grin/tape.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "grin/errors.hpp"
#include "grin/net.hpp"

namespace grin {

std::size_t numel(const ParamValue& v) {
  return std::visit([](const auto& t) { return t.size(); }, v);
}

std::vector<double>& param_data(ParamValue& v) {
  return std::visit([](auto& t) -> std::vector<double>& { return t.data; }, v);
}

const std::vector<double>& param_data(const ParamValue& v) {
  return std::visit([](const auto& t) -> const std::vector<double>& { return t.data; }, v);
}

ParamValue zeros_like(const ParamValue& v) {
  ParamValue out = v;
  std::fill(param_data(out).begin(), param_data(out).end(), 0.0);
  return out;
}

std::size_t GradTape::Shape::numel() const {
  return static_cast<std::size_t>(d0) * d1 * d2 * d3;
}

NodeRef GradTape::push(Shape shape, std::vector<double> value, bool needs_grad,
                       std::function<void(GradTape&)> bwd, std::string param_name) {
  Node n;
  n.shape = shape;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.backward = std::move(bwd);
  n.param_name = std::move(param_name);
  nodes_.push_back(std::move(n));
  return NodeRef{static_cast<int>(nodes_.size()) - 1};
}

const GradTape::Node& GradTape::node(NodeRef r) const {
  if (!r.valid() || r.id >= static_cast<int>(nodes_.size())) {
    throw StateError("GradTape: reference does not name a node on this tape");
  }
  return nodes_[r.id];
}

GradTape::Node& GradTape::node_mut(NodeRef r) {
  return const_cast<Node&>(node(r));
}

const GradTape::Node& GradTape::checked(NodeRef r, int rank, const char* op) const {
  const Node& n = node(r);
  if (n.shape.rank != rank) {
    std::ostringstream os;
    os << op << ": expected a rank-" << rank << " input, got rank " << n.shape.rank;
    throw ShapeError(os.str());
  }
  return n;
}

NodeRef GradTape::constant(const Tensor4& v) {
  return push(Shape{4, v.n, v.c, v.h, v.w}, v.data, false, nullptr);
}

NodeRef GradTape::constant(const Matrix& v) {
  return push(Shape{2, v.rows, v.cols, 1, 1}, v.data, false, nullptr);
}

NodeRef GradTape::constant_scalar(double v) {
  return push(Shape{0, 1, 1, 1, 1}, {v}, false, nullptr);
}

NodeRef GradTape::param(const std::string& name, const Tensor4& v) {
  if (param_ids_.count(name) > 0) {
    throw StateError("GradTape: parameter '" + name + "' registered twice");
  }
  NodeRef r = push(Shape{4, v.n, v.c, v.h, v.w}, v.data, true, nullptr, name);
  param_ids_[name] = r.id;
  return r;
}

NodeRef GradTape::param(const std::string& name, const Matrix& v) {
  if (param_ids_.count(name) > 0) {
    throw StateError("GradTape: parameter '" + name + "' registered twice");
  }
  NodeRef r = push(Shape{2, v.rows, v.cols, 1, 1}, v.data, true, nullptr, name);
  param_ids_[name] = r.id;
  return r;
}

NodeRef GradTape::param(const std::string& name, const ParamValue& v) {
  return std::visit([&](const auto& t) { return param(name, t); }, v);
}

// ---------------------------------------------------------------------------
// conv2d: odd kernel, same padding, stride 1.
// ---------------------------------------------------------------------------

NodeRef GradTape::conv2d(NodeRef x, NodeRef weight, NodeRef bias) {
  const Node& xn = checked(x, 4, "conv2d");
  const Node& wn = checked(weight, 4, "conv2d");
  const Node& bn = checked(bias, 2, "conv2d");
  Tensor4 out = grin::conv2d(value4(x), value4(weight), value2(bias));

  const int batch = xn.shape.d0, cin = xn.shape.d1, ih = xn.shape.d2, iw = xn.shape.d3;
  const int cout = wn.shape.d0, k = wn.shape.d2;
  const int pad = k / 2;
  const std::size_t plane = static_cast<std::size_t>(ih) * iw;

  const bool needs = xn.needs_grad || wn.needs_grad || bn.needs_grad;
  const int xid = x.id, wid = weight.id, bid = bias.id;
  NodeRef out_ref = push(Shape{4, batch, cout, ih, iw}, std::move(out.data), needs, nullptr);
  const int oid = out_ref.id;
  if (needs) {
    nodes_[oid].backward = [xid, wid, bid, oid, batch, cin, cout, ih, iw, k, pad,
                            plane](GradTape& t) {
      const std::vector<double>& gy = t.grad_of(oid);
      const std::vector<double>& xv = t.val_of(xid);
      const std::vector<double>& wv = t.val_of(wid);
      if (t.wants(xid)) {
        std::vector<double>& gx = t.grad_of(xid);
        for (int n = 0; n < batch; ++n) {
          for (int co = 0; co < cout; ++co) {
            const double* gdst = &gy[(static_cast<std::size_t>(n) * cout + co) * plane];
            for (int ci = 0; ci < cin; ++ci) {
              double* gsrc = &gx[(static_cast<std::size_t>(n) * cin + ci) * plane];
              for (int ky = 0; ky < k; ++ky) {
                const int y0 = std::max(0, pad - ky), y1 = std::min(ih, ih + pad - ky);
                for (int kx = 0; kx < k; ++kx) {
                  const double coef =
                      wv[((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx];
                  if (coef == 0.0) continue;
                  const int x0 = std::max(0, pad - kx), x1 = std::min(iw, iw + pad - kx);
                  for (int y = y0; y < y1; ++y) {
                    double* s = gsrc + static_cast<std::size_t>(y + ky - pad) * iw + (x0 + kx - pad);
                    const double* d = gdst + static_cast<std::size_t>(y) * iw + x0;
                    for (int i = 0; i < x1 - x0; ++i) s[i] += coef * d[i];
                  }
                }
              }
            }
          }
        }
      }
      if (t.wants(wid)) {
        std::vector<double>& gw = t.grad_of(wid);
        for (int n = 0; n < batch; ++n) {
          for (int co = 0; co < cout; ++co) {
            const double* gdst = &gy[(static_cast<std::size_t>(n) * cout + co) * plane];
            for (int ci = 0; ci < cin; ++ci) {
              const double* src = &xv[(static_cast<std::size_t>(n) * cin + ci) * plane];
              for (int ky = 0; ky < k; ++ky) {
                const int y0 = std::max(0, pad - ky), y1 = std::min(ih, ih + pad - ky);
                for (int kx = 0; kx < k; ++kx) {
                  const int x0 = std::max(0, pad - kx), x1 = std::min(iw, iw + pad - kx);
                  double acc = 0.0;
                  for (int y = y0; y < y1; ++y) {
                    const double* s =
                        src + static_cast<std::size_t>(y + ky - pad) * iw + (x0 + kx - pad);
                    const double* d = gdst + static_cast<std::size_t>(y) * iw + x0;
                    for (int i = 0; i < x1 - x0; ++i) acc += s[i] * d[i];
                  }
                  gw[((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx] += acc;
                }
              }
            }
          }
        }
      }
      if (t.wants(bid)) {
        std::vector<double>& gb = t.grad_of(bid);
        for (int n = 0; n < batch; ++n) {
          for (int co = 0; co < cout; ++co) {
            const double* gdst = &gy[(static_cast<std::size_t>(n) * cout + co) * plane];
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) acc += gdst[i];
            gb[co] += acc;
          }
        }
      }
    };
  }
  return out_ref;
}

NodeRef GradTape::relu(NodeRef x) {
  const Node& xn = node(x);
  std::vector<double> out = xn.value;
  for (double& v : out) v = std::max(v, 0.0);
  const bool needs = xn.needs_grad;
  NodeRef r = push(xn.shape, std::move(out), needs, nullptr);
  const int oid = r.id, xid = x.id;
  if (needs) {
    nodes_[oid].backward = [oid, xid](GradTape& t) {
      if (!t.wants(xid)) return;
      const std::vector<double>& gy = t.grad_of(oid);
      const std::vector<double>& ov = t.val_of(oid);
      std::vector<double>& gx = t.grad_of(xid);
      for (std::size_t i = 0; i < gy.size(); ++i) {
        if (ov[i] > 0.0) gx[i] += gy[i];
      }
    };
  }
  return r;
}

NodeRef GradTape::avg_pool2(NodeRef x) {
  const Node& xn = checked(x, 4, "avg_pool2");
  const int batch = xn.shape.d0, ch = xn.shape.d1, ih = xn.shape.d2, iw = xn.shape.d3;
  Tensor4 out = grin::avg_pool2(value4(x));
  const int oh = out.h, ow = out.w;
  const std::size_t planes = static_cast<std::size_t>(batch) * ch;
  const bool needs = xn.needs_grad;
  NodeRef r = push(Shape{4, batch, ch, oh, ow}, std::move(out.data), needs, nullptr);
  const int oid = r.id, xid = x.id;
  if (needs) {
    nodes_[oid].backward = [oid, xid, planes, ih, iw, oh, ow](GradTape& t) {
      if (!t.wants(xid)) return;
      const std::vector<double>& gy = t.grad_of(oid);
      std::vector<double>& gx = t.grad_of(xid);
      for (std::size_t p = 0; p < planes; ++p) {
        const double* gd = &gy[p * oh * ow];
        double* gs = &gx[p * ih * iw];
        for (int y = 0; y < oh; ++y) {
          for (int xo = 0; xo < ow; ++xo) {
            const double g = 0.25 * gd[static_cast<std::size_t>(y) * ow + xo];
            double* s = gs + static_cast<std::size_t>(2 * y) * iw + 2 * xo;
            s[0] += g;
            s[1] += g;
            s[iw] += g;
            s[iw + 1] += g;
          }
        }
      }
    };
  }
  return r;
}

NodeRef GradTape::upsample2(NodeRef x) {
  const Node& xn = checked(x, 4, "upsample2");
  const int batch = xn.shape.d0, ch = xn.shape.d1, ih = xn.shape.d2, iw = xn.shape.d3;
  Tensor4 out = grin::upsample2(value4(x));
  const int oh = out.h, ow = out.w;
  const std::size_t planes = static_cast<std::size_t>(batch) * ch;
  const bool needs = xn.needs_grad;
  NodeRef r = push(Shape{4, batch, ch, oh, ow}, std::move(out.data), needs, nullptr);
  const int oid = r.id, xid = x.id;
  if (needs) {
    nodes_[oid].backward = [oid, xid, planes, ih, iw, oh, ow](GradTape& t) {
      if (!t.wants(xid)) return;
      const std::vector<double>& gy = t.grad_of(oid);
      std::vector<double>& gx = t.grad_of(xid);
      for (std::size_t p = 0; p < planes; ++p) {
        const double* gd = &gy[p * oh * ow];
        double* gs = &gx[p * ih * iw];
        for (int y = 0; y < oh; ++y) {
          const double* grow = gd + static_cast<std::size_t>(y) * ow;
          double* srow = gs + static_cast<std::size_t>(y / 2) * iw;
          for (int xo = 0; xo < ow; ++xo) srow[xo / 2] += grow[xo];
        }
      }
    };
  }
  return r;
}

NodeRef GradTape::channel_mean(NodeRef x) {
  const Node& xn = checked(x, 4, "channel_mean");
  const int batch = xn.shape.d0, ch = xn.shape.d1;
  const int hw = xn.shape.d2 * xn.shape.d3;
  std::vector<double> out(static_cast<std::size_t>(batch) * ch);
  for (std::size_t p = 0; p < out.size(); ++p) {
    const double* plane = &xn.value[p * hw];
    double sum = 0.0;
    for (int i = 0; i < hw; ++i) sum += plane[i];
    out[p] = sum / hw;
  }
  const bool needs = xn.needs_grad;
  NodeRef r = push(Shape{2, batch, ch, 1, 1}, std::move(out), needs, nullptr);
  const int oid = r.id, xid = x.id;
  if (needs) {
    nodes_[oid].backward = [oid, xid, hw](GradTape& t) {
      if (!t.wants(xid)) return;
      const std::vector<double>& gy = t.grad_of(oid);
      std::vector<double>& gx = t.grad_of(xid);
      const double inv = 1.0 / hw;
      for (std::size_t p = 0; p < gy.size(); ++p) {
        const double g = gy[p] * inv;
        double* plane = &gx[p * hw];
        for (int i = 0; i < hw; ++i) plane[i] += g;
      }
    };
  }
  return r;
}

NodeRef GradTape::channel_std(NodeRef x, double eps) {
  const Node& xn = checked(x, 4, "channel_std");
  const int batch = xn.shape.d0, ch = xn.shape.d1;
  const int hw = xn.shape.d2 * xn.shape.d3;
  const std::size_t groups = static_cast<std::size_t>(batch) * ch;
  std::vector<double> means(groups), out(groups);
  for (std::size_t p = 0; p < groups; ++p) {
    const double* plane = &xn.value[p * hw];
    double sum = 0.0;
    for (int i = 0; i < hw; ++i) sum += plane[i];
    const double mean = sum / hw;
    double var = 0.0;
    for (int i = 0; i < hw; ++i) {
      const double d = plane[i] - mean;
      var += d * d;
    }
    means[p] = mean;
    out[p] = std::sqrt(var / hw + eps);
  }
  const bool needs = xn.needs_grad;
  NodeRef r = push(Shape{2, batch, ch, 1, 1}, std::move(out), needs, nullptr);
  const int oid = r.id, xid = x.id;
  if (needs) {
    // d sigma / d x_i = (x_i - mean) / (HW * sigma); the mean path cancels.
    nodes_[oid].backward = [oid, xid, hw, means = std::move(means)](GradTape& t) {
      if (!t.wants(xid)) return;
      const std::vector<double>& gy = t.grad_of(oid);
      const std::vector<double>& sv = t.val_of(oid);
      const std::vector<double>& xv = t.val_of(xid);
      std::vector<double>& gx = t.grad_of(xid);
      for (std::size_t p = 0; p < gy.size(); ++p) {
        const double coef = gy[p] / (hw * sv[p]);
        const double mean = means[p];
        const double* plane = &xv[p * hw];
        double* gplane = &gx[p * hw];
        for (int i = 0; i < hw; ++i) gplane[i] += coef * (plane[i] - mean);
      }
    };
  }
  return r;
}

namespace {

void check_per_channel(const int batch, const int ch, int rows, int cols, const char* op) {
  if (rows != batch || cols != ch) {
    std::ostringstream os;
    os << op << ": per-channel operand must be " << batch << "x" << ch << ", got " << rows << "x"
       << cols;
    throw ShapeError(os.str());
  }
}

}  // namespace

NodeRef GradTape::whiten(NodeRef x, NodeRef mean, NodeRef stdev) {
  const Node& xn = checked(x, 4, "whiten");
  const Node& mn = checked(mean, 2, "whiten");
  const Node& sn = checked(stdev, 2, "whiten");
  const int batch = xn.shape.d0, ch = xn.shape.d1;
  const int hw = xn.shape.d2 * xn.shape.d3;
  check_per_channel(batch, ch, mn.shape.d0, mn.shape.d1, "whiten");
  check_per_channel(batch, ch, sn.shape.d0, sn.shape.d1, "whiten");
  const std::size_t groups = static_cast<std::size_t>(batch) * ch;

  std::vector<double> out(xn.value.size());
  for (std::size_t p = 0; p < groups; ++p) {
    const double m = mn.value[p];
    const double inv = 1.0 / sn.value[p];
    const double* src = &xn.value[p * hw];
    double* dst = &out[p * hw];
    for (int i = 0; i < hw; ++i) dst[i] = (src[i] - m) * inv;
  }
  const bool needs = xn.needs_grad || mn.needs_grad || sn.needs_grad;
  NodeRef r = push(xn.shape, std::move(out), needs, nullptr);
  const int oid = r.id, xid = x.id, mid = mean.id, sid = stdev.id;
  if (needs) {
    nodes_[oid].backward = [oid, xid, mid, sid, hw, groups](GradTape& t) {
      const std::vector<double>& gy = t.grad_of(oid);
      const std::vector<double>& ov = t.val_of(oid);
      const std::vector<double>& sv = t.val_of(sid);
      for (std::size_t p = 0; p < groups; ++p) {
        const double inv = 1.0 / sv[p];
        const double* g = &gy[p * hw];
        const double* o = &ov[p * hw];
        if (t.wants(xid)) {
          double* gx = &t.grad_of(xid)[p * hw];
          for (int i = 0; i < hw; ++i) gx[i] += g[i] * inv;
        }
        if (t.wants(mid)) {
          double acc = 0.0;
          for (int i = 0; i < hw; ++i) acc += g[i];
          t.grad_of(mid)[p] -= acc * inv;
        }
        if (t.wants(sid)) {
          double acc = 0.0;
          for (int i = 0; i < hw; ++i) acc += g[i] * o[i];
          t.grad_of(sid)[p] -= acc * inv;
        }
      }
    };
  }
  return r;
}

NodeRef GradTape::scale_bias(NodeRef x, NodeRef stdev, NodeRef mean) {
  const Node& xn = checked(x, 4, "scale_bias");
  const Node& sn = checked(stdev, 2, "scale_bias");
  const Node& mn = checked(mean, 2, "scale_bias");
  const int batch = xn.shape.d0, ch = xn.shape.d1;
  const int hw = xn.shape.d2 * xn.shape.d3;
  check_per_channel(batch, ch, sn.shape.d0, sn.shape.d1, "scale_bias");
  check_per_channel(batch, ch, mn.shape.d0, mn.shape.d1, "scale_bias");
  const std::size_t groups = static_cast<std::size_t>(batch) * ch;

  std::vector<double> out(xn.value.size());
  for (std::size_t p = 0; p < groups; ++p) {
    const double s = sn.value[p];
    const double m = mn.value[p];
    const double* src = &xn.value[p * hw];
    double* dst = &out[p * hw];
    for (int i = 0; i < hw; ++i) dst[i] = src[i] * s + m;
  }
  const bool needs = xn.needs_grad || sn.needs_grad || mn.needs_grad;
  NodeRef r = push(xn.shape, std::move(out), needs, nullptr);
  const int oid = r.id, xid = x.id, sid = stdev.id, mid = mean.id;
  if (needs) {
    nodes_[oid].backward = [oid, xid, sid, mid, hw, groups](GradTape& t) {
      const std::vector<double>& gy = t.grad_of(oid);
      const std::vector<double>& xv = t.val_of(xid);
      const std::vector<double>& sv = t.val_of(sid);
      for (std::size_t p = 0; p < groups; ++p) {
        const double* g = &gy[p * hw];
        if (t.wants(xid)) {
          const double s = sv[p];
          double* gx = &t.grad_of(xid)[p * hw];
          for (int i = 0; i < hw; ++i) gx[i] += g[i] * s;
        }
        if (t.wants(sid)) {
          const double* xp = &xv[p * hw];
          double acc = 0.0;
          for (int i = 0; i < hw; ++i) acc += g[i] * xp[i];
          t.grad_of(sid)[p] += acc;
        }
        if (t.wants(mid)) {
          double acc = 0.0;
          for (int i = 0; i < hw; ++i) acc += g[i];
          t.grad_of(mid)[p] += acc;
        }
      }
    };
  }
  return r;
}

NodeRef GradTape::matmul(NodeRef a, NodeRef b) {
  const Node& an = checked(a, 2, "matmul");
  const Node& bn = checked(b, 2, "matmul");
  Matrix am{an.shape.d0, an.shape.d1, 0.0};
  am.data = an.value;
  Matrix bm{bn.shape.d0, bn.shape.d1, 0.0};
  bm.data = bn.value;
  Matrix prod = grin::matmul(am, bm);  // shares error behavior with the core op

  const bool needs = an.needs_grad || bn.needs_grad;
  const int p = an.shape.d0, q = an.shape.d1, s = bn.shape.d1;
  NodeRef r = push(Shape{2, prod.rows, prod.cols, 1, 1}, std::move(prod.data), needs, nullptr);
  const int oid = r.id, aid = a.id, bid = b.id;
  if (needs) {
    nodes_[oid].backward = [oid, aid, bid, p, q, s](GradTape& t) {
      const std::vector<double>& gy = t.grad_of(oid);
      const std::vector<double>& av = t.val_of(aid);
      const std::vector<double>& bv = t.val_of(bid);
      if (t.wants(aid)) {
        std::vector<double>& ga = t.grad_of(aid);
        for (int i = 0; i < p; ++i) {
          for (int kk = 0; kk < q; ++kk) {
            double acc = 0.0;
            const double* grow = &gy[static_cast<std::size_t>(i) * s];
            const double* brow = &bv[static_cast<std::size_t>(kk) * s];
            for (int j = 0; j < s; ++j) acc += grow[j] * brow[j];
            ga[static_cast<std::size_t>(i) * q + kk] += acc;
          }
        }
      }
      if (t.wants(bid)) {
        std::vector<double>& gb = t.grad_of(bid);
        for (int kk = 0; kk < q; ++kk) {
          for (int i = 0; i < p; ++i) {
            const double aik = av[static_cast<std::size_t>(i) * q + kk];
            if (aik == 0.0) continue;
            const double* grow = &gy[static_cast<std::size_t>(i) * s];
            double* brow = &gb[static_cast<std::size_t>(kk) * s];
            for (int j = 0; j < s; ++j) brow[j] += aik * grow[j];
          }
        }
      }
    };
  }
  return r;
}

NodeRef GradTape::sum_sq_diff(NodeRef a, NodeRef b, double factor) {
  const Node& an = node(a);
  const Node& bn = node(b);
  if (!(an.shape == bn.shape)) {
    throw ShapeError("sum_sq_diff: operands must have identical shapes");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < an.value.size(); ++i) {
    const double d = an.value[i] - bn.value[i];
    acc += d * d;
  }
  const bool needs = an.needs_grad || bn.needs_grad;
  NodeRef r = push(Shape{0, 1, 1, 1, 1}, {factor * acc}, needs, nullptr);
  const int oid = r.id, aid = a.id, bid = b.id;
  if (needs) {
    nodes_[oid].backward = [oid, aid, bid, factor](GradTape& t) {
      const double g = 2.0 * factor * t.grad_of(oid)[0];
      const std::vector<double>& av = t.val_of(aid);
      const std::vector<double>& bv = t.val_of(bid);
      const bool wa = t.wants(aid), wb = t.wants(bid);
      for (std::size_t i = 0; i < av.size(); ++i) {
        const double d = g * (av[i] - bv[i]);
        if (wa) t.grad_of(aid)[i] += d;
        if (wb) t.grad_of(bid)[i] -= d;
      }
    };
  }
  return r;
}

NodeRef GradTape::add(NodeRef a, NodeRef b) {
  const Node& an = checked(a, 0, "add");
  const Node& bn = checked(b, 0, "add");
  const bool needs = an.needs_grad || bn.needs_grad;
  NodeRef r = push(Shape{0, 1, 1, 1, 1}, {an.value[0] + bn.value[0]}, needs, nullptr);
  const int oid = r.id, aid = a.id, bid = b.id;
  if (needs) {
    nodes_[oid].backward = [oid, aid, bid](GradTape& t) {
      const double g = t.grad_of(oid)[0];
      if (t.wants(aid)) t.grad_of(aid)[0] += g;
      if (t.wants(bid)) t.grad_of(bid)[0] += g;
    };
  }
  return r;
}

NodeRef GradTape::scale(NodeRef a, double factor) {
  const Node& an = checked(a, 0, "scale");
  const bool needs = an.needs_grad;
  NodeRef r = push(Shape{0, 1, 1, 1, 1}, {an.value[0] * factor}, needs, nullptr);
  const int oid = r.id, aid = a.id;
  if (needs) {
    nodes_[oid].backward = [oid, aid, factor](GradTape& t) {
      if (t.wants(aid)) t.grad_of(aid)[0] += factor * t.grad_of(oid)[0];
    };
  }
  return r;
}

NodeRef GradTape::dot(NodeRef x, const std::vector<double>& weights) {
  const Node& xn = node(x);
  if (xn.value.size() != weights.size()) {
    throw ShapeError("dot: weight vector length does not match the node");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * xn.value[i];
  const bool needs = xn.needs_grad;
  NodeRef r = push(Shape{0, 1, 1, 1, 1}, {acc}, needs, nullptr);
  const int oid = r.id, xid = x.id;
  if (needs) {
    nodes_[oid].backward = [oid, xid, weights](GradTape& t) {
      if (!t.wants(xid)) return;
      const double g = t.grad_of(oid)[0];
      std::vector<double>& gx = t.grad_of(xid);
      for (std::size_t i = 0; i < weights.size(); ++i) gx[i] += g * weights[i];
    };
  }
  return r;
}

Tensor4 GradTape::value4(NodeRef r) const {
  const Node& n = checked(r, 4, "value4");
  Tensor4 t(n.shape.d0, n.shape.d1, n.shape.d2, n.shape.d3);
  t.data = n.value;
  return t;
}

Matrix GradTape::value2(NodeRef r) const {
  const Node& n = checked(r, 2, "value2");
  Matrix m(n.shape.d0, n.shape.d1);
  m.data = n.value;
  return m;
}

double GradTape::value_scalar(NodeRef r) const {
  const Node& n = checked(r, 0, "value_scalar");
  return n.value[0];
}

ParamMap GradTape::backward(NodeRef loss, double loss_seed) {
  if (nodes_.empty()) {
    throw StateError("backward: no forward pass has been recorded on this tape");
  }
  if (!loss.valid() || loss.id >= static_cast<int>(nodes_.size())) {
    throw StateError("backward: loss is not a node on this tape");
  }
  if (nodes_[loss.id].shape.rank != 0) {
    throw StateError("backward: the loss node must be a scalar");
  }

  for (Node& n : nodes_) {
    if (n.needs_grad) n.grad.assign(n.value.size(), 0.0);
  }
  if (nodes_[loss.id].needs_grad) nodes_[loss.id].grad[0] = loss_seed;

  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.needs_grad && n.backward) n.backward(*this);
  }

  ParamMap grads;
  for (const auto& [name, id] : param_ids_) {
    const Node& n = nodes_[id];
    std::vector<double> g =
        n.grad.empty() ? std::vector<double>(n.value.size(), 0.0) : n.grad;
    if (n.shape.rank == 4) {
      Tensor4 t(n.shape.d0, n.shape.d1, n.shape.d2, n.shape.d3);
      t.data = std::move(g);
      grads[name] = std::move(t);
    } else {
      Matrix m(n.shape.d0, n.shape.d1);
      m.data = std::move(g);
      grads[name] = std::move(m);
    }
  }
  clear();
  return grads;
}

void GradTape::clear() {
  nodes_.clear();
  param_ids_.clear();
}

}  // namespace grin
