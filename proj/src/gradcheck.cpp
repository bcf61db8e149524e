#include "grin/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <variant>

#include "grin/errors.hpp"
#include "grin/graph.hpp"
#include "grin/net.hpp"
#include "grin/pipeline.hpp"
#include "grin/rng.hpp"

namespace grin {

ParamMap finite_diff_grad(const std::function<double(const ParamMap&)>& f, const ParamMap& params,
                          double h) {
  if (h <= 0.0) throw GrinError("finite_diff_grad: h must be > 0");
  ParamMap work = params;
  ParamMap grads;
  for (auto& [name, value] : work) {
    ParamValue g = zeros_like(value);
    std::vector<double>& gv = param_data(g);
    std::vector<double>& wv = param_data(value);
    for (std::size_t i = 0; i < wv.size(); ++i) {
      const double saved = wv[i];
      wv[i] = saved + h;
      const double fp = f(work);
      wv[i] = saved - h;
      const double fm = f(work);
      wv[i] = saved;
      gv[i] = (fp - fm) / (2.0 * h);
    }
    grads[name] = std::move(g);
  }
  return grads;
}

namespace {

using RefMap = std::map<std::string, NodeRef>;
using Builder = std::function<NodeRef(GradTape&, const RefMap&)>;

GroupCheck compare_group(const std::string& group, const std::vector<double>& analytic,
                         const std::vector<double>& probe) {
  double gap = 0.0, norm_a = 0.0, norm_p = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    gap = std::max(gap, std::abs(analytic[i] - probe[i]));
    norm_a = std::max(norm_a, std::abs(analytic[i]));
    norm_p = std::max(norm_p, std::abs(probe[i]));
  }
  GroupCheck gc;
  gc.group = group;
  gc.max_rel_err = gap / std::max({norm_a, norm_p, 1e-12});
  gc.coords_checked = static_cast<int>(analytic.size());
  return gc;
}

void run_case(std::vector<GroupCheck>& out, const std::string& op, const ParamMap& inputs,
              const Builder& build, double h) {
  GradTape tape;
  RefMap refs;
  for (const auto& [name, value] : inputs) refs[name] = tape.param(name, value);
  ParamMap analytic = tape.backward(build(tape, refs));

  auto f = [&build](const ParamMap& p) {
    GradTape probe_tape;
    RefMap probe_refs;
    for (const auto& [name, value] : p) probe_refs[name] = probe_tape.param(name, value);
    return probe_tape.value_scalar(build(probe_tape, probe_refs));
  };
  ParamMap fd = finite_diff_grad(f, inputs, h);

  for (const auto& [name, aval] : analytic) {
    out.push_back(compare_group(op + "/" + name, param_data(aval), param_data(fd.at(name))));
  }
}

std::vector<double> random_weights(Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  for (double& v : w) v = rng.normal();
  return w;
}

// Uniform values bounded away from zero, so rectifier kinks stay outside
// the probe interval.
Tensor4 signed_offset_uniform(Rng& rng, int n, int c, int h, int w) {
  Tensor4 t(n, c, h, w);
  for (double& v : t.data) {
    const double mag = rng.uniform(0.2, 1.0);
    v = rng.below(2) == 0 ? mag : -mag;
  }
  return t;
}

std::vector<std::size_t> sample_coords(Rng& rng, std::size_t n, int want) {
  std::vector<std::size_t> coords;
  if (n <= static_cast<std::size_t>(want)) {
    coords.resize(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    return coords;
  }
  std::set<std::size_t> seen;
  while (seen.size() < static_cast<std::size_t>(want)) {
    seen.insert(static_cast<std::size_t>(rng.below(n)));
  }
  coords.assign(seen.begin(), seen.end());
  return coords;
}

}  // namespace

std::vector<GroupCheck> check_primitives(std::uint64_t seed, double h) {
  Rng rng(seed);
  std::vector<GroupCheck> out;

  {
    Tensor4 x(2, 3, 5, 4);
    fill_uniform(x, rng, -1.0, 1.0);
    Tensor4 kernel(4, 3, 3, 3);
    fill_normal(kernel, rng, 0.5);
    Matrix bias(1, 4);
    fill_normal(bias, rng, 0.5);
    const auto wts = random_weights(rng, 2 * 4 * 5 * 4);
    ParamMap in{{"x", x}, {"kernel", kernel}, {"bias", bias}};
    run_case(out, "conv2d", in,
             [wts](GradTape& t, const RefMap& r) {
               return t.dot(t.conv2d(r.at("x"), r.at("kernel"), r.at("bias")), wts);
             },
             h);
  }
  {
    const Tensor4 x = signed_offset_uniform(rng, 2, 3, 4, 4);
    const auto wts = random_weights(rng, x.size());
    run_case(out, "relu", {{"x", x}},
             [wts](GradTape& t, const RefMap& r) { return t.dot(t.relu(r.at("x")), wts); }, h);
  }
  {
    Tensor4 x(2, 2, 4, 4);
    fill_uniform(x, rng, -1.0, 1.0);
    const auto wts = random_weights(rng, 2 * 2 * 2 * 2);
    run_case(out, "avg_pool2", {{"x", x}},
             [wts](GradTape& t, const RefMap& r) { return t.dot(t.avg_pool2(r.at("x")), wts); },
             h);
  }
  {
    Tensor4 x(2, 2, 3, 3);
    fill_uniform(x, rng, -1.0, 1.0);
    const auto wts = random_weights(rng, 2 * 2 * 6 * 6);
    run_case(out, "upsample2", {{"x", x}},
             [wts](GradTape& t, const RefMap& r) { return t.dot(t.upsample2(r.at("x")), wts); },
             h);
  }
  {
    Tensor4 x(2, 3, 4, 4);
    fill_uniform(x, rng, -1.0, 1.0);
    const auto wts = random_weights(rng, 6);
    run_case(out, "channel_mean", {{"x", x}},
             [wts](GradTape& t, const RefMap& r) { return t.dot(t.channel_mean(r.at("x")), wts); },
             h);
  }
  {
    Tensor4 x(2, 3, 4, 4);
    fill_uniform(x, rng, -1.0, 1.0);
    const auto wts = random_weights(rng, 6);
    run_case(out, "channel_std", {{"x", x}},
             [wts](GradTape& t, const RefMap& r) {
               return t.dot(t.channel_std(r.at("x"), 1e-5), wts);
             },
             h);
  }
  {
    Tensor4 x(2, 3, 3, 3);
    fill_uniform(x, rng, -1.0, 1.0);
    Matrix mean(2, 3);
    fill_uniform(mean, rng, -0.5, 0.5);
    Matrix stdev(2, 3);
    fill_uniform(stdev, rng, 0.5, 1.5);
    const auto wts = random_weights(rng, x.size());
    ParamMap in{{"x", x}, {"mean", mean}, {"stdev", stdev}};
    run_case(out, "whiten", in,
             [wts](GradTape& t, const RefMap& r) {
               return t.dot(t.whiten(r.at("x"), r.at("mean"), r.at("stdev")), wts);
             },
             h);
  }
  {
    Tensor4 x(2, 3, 3, 3);
    fill_uniform(x, rng, -1.0, 1.0);
    Matrix mean(2, 3);
    fill_uniform(mean, rng, -0.5, 0.5);
    Matrix stdev(2, 3);
    fill_uniform(stdev, rng, 0.5, 1.5);
    const auto wts = random_weights(rng, x.size());
    ParamMap in{{"x", x}, {"mean", mean}, {"stdev", stdev}};
    run_case(out, "scale_bias", in,
             [wts](GradTape& t, const RefMap& r) {
               return t.dot(t.scale_bias(r.at("x"), r.at("stdev"), r.at("mean")), wts);
             },
             h);
  }
  {
    Matrix a(3, 4);
    fill_uniform(a, rng, -1.0, 1.0);
    Matrix b(4, 5);
    fill_uniform(b, rng, -1.0, 1.0);
    const auto wts = random_weights(rng, 15);
    ParamMap in{{"a", a}, {"b", b}};
    run_case(out, "matmul", in,
             [wts](GradTape& t, const RefMap& r) {
               return t.dot(t.matmul(r.at("a"), r.at("b")), wts);
             },
             h);
  }
  {
    Tensor4 a(2, 2, 3, 3);
    fill_uniform(a, rng, -1.0, 1.0);
    Tensor4 b(2, 2, 3, 3);
    fill_uniform(b, rng, -1.0, 1.0);
    ParamMap in{{"a", a}, {"b", b}};
    run_case(out, "sum_sq_diff", in,
             [](GradTape& t, const RefMap& r) {
               return t.sum_sq_diff(r.at("a"), r.at("b"), 0.5);
             },
             h);
  }
  {
    Matrix a(2, 3);
    fill_uniform(a, rng, -1.0, 1.0);
    Matrix b(3, 3);
    fill_uniform(b, rng, -1.0, 1.0);
    const auto wa = random_weights(rng, 6);
    const auto wb = random_weights(rng, 9);
    ParamMap in{{"a", a}, {"b", b}};
    run_case(out, "scalar_ops", in,
             [wa, wb](GradTape& t, const RefMap& r) {
               return t.scale(t.add(t.dot(r.at("a"), wa), t.dot(r.at("b"), wb)), 1.7);
             },
             h);
  }
  {
    // One input feeding statistics, whitening, and the distance at once, so
    // gradient accumulation across consumers is exercised.
    Tensor4 x(2, 3, 4, 4);
    fill_uniform(x, rng, -1.0, 1.0);
    Tensor4 kernel(4, 3, 3, 3);
    fill_normal(kernel, rng, 0.5);
    Matrix bias(1, 4);
    fill_normal(bias, rng, 0.5);
    Matrix stdev(2, 4);
    fill_uniform(stdev, rng, 0.5, 1.5);
    Matrix mean(2, 4);
    fill_uniform(mean, rng, -0.5, 0.5);
    Tensor4 target(2, 4, 4, 4);
    fill_uniform(target, rng, -1.0, 1.0);
    Matrix mean_target(2, 4);
    fill_uniform(mean_target, rng, -0.5, 0.5);
    Matrix std_target(2, 4);
    fill_uniform(std_target, rng, 0.5, 1.5);
    ParamMap in{{"x", x}, {"kernel", kernel}, {"bias", bias}, {"stdev", stdev}, {"mean", mean}};
    run_case(out, "composite", in,
             [target, mean_target, std_target](GradTape& t, const RefMap& r) {
               const NodeRef feats = t.conv2d(r.at("x"), r.at("kernel"), r.at("bias"));
               const NodeRef mu = t.channel_mean(feats);
               const NodeRef sigma = t.channel_std(feats, 1e-5);
               const NodeRef white = t.whiten(feats, mu, sigma);
               const NodeRef styled = t.scale_bias(white, r.at("stdev"), r.at("mean"));
               // Statistic gap terms keep the distance sensitive to uniform
               // shifts, which whitening alone would cancel.
               const NodeRef stat_gaps =
                   t.add(t.sum_sq_diff(mu, t.constant(mean_target), 1.0),
                         t.sum_sq_diff(sigma, t.constant(std_target), 1.0));
               return t.add(t.sum_sq_diff(styled, t.constant(target), 1.0), stat_gaps);
             },
             h);
  }
  return out;
}

std::vector<GroupCheck> check_pipeline(std::uint64_t seed, bool freeze_grin_target, double h,
                                       int coords_per_group) {
  Rng rng(seed);
  const Encoder enc = Encoder::make();

  Tensor4 content(2, 3, 16, 16);
  fill_uniform(content, rng, 0.0, 1.0);
  Tensor4 style(2, 3, 16, 16);
  fill_uniform(style, rng, 0.0, 1.0);

  const DecoderParams dec = DecoderParams::init(rng);
  const GraphStack stack = GraphStack::identity_init(64, 2, rng, 1e-2);

  PipelineConfig cfg;
  cfg.freeze_grin_target = freeze_grin_target;

  ParamMap params = dec.to_params();
  for (int l = 0; l < stack.num_layers(); ++l) params[theta_name(l)] = stack.layers[l];

  GradTape tape;
  const DecoderRefs drefs = register_decoder(tape, dec);
  std::vector<NodeRef> trefs;
  for (int l = 0; l < stack.num_layers(); ++l) {
    trefs.push_back(tape.param(theta_name(l), stack.layers[l]));
  }
  const StepLosses losses = build_loss_graph(tape, enc, drefs, trefs, content, style, cfg);
  const ParamMap analytic = tape.backward(losses.total);

  const Tensor4 t0 = grin_target(enc, stack.layers, content, style, cfg);
  const std::vector<Tensor4> style_taps = enc.forward(style).taps;

  auto eval = [&](const ParamMap& p) {
    const DecoderParams d2 = DecoderParams::from_params(p);
    std::vector<Matrix> th2;
    for (int l = 0; l < stack.num_layers(); ++l) {
      th2.push_back(std::get<Matrix>(p.at(theta_name(l))));
    }
    const Tensor4 t_in = freeze_grin_target ? t0 : grin_target(enc, th2, content, style, cfg);
    return pipeline_loss(enc, d2, t_in, t0, style_taps, cfg).total;
  };

  ParamMap work = params;
  std::vector<GroupCheck> out;
  for (const auto& [name, aval] : analytic) {
    const std::vector<double>& av = param_data(aval);
    std::vector<double>& wv = param_data(work.at(name));
    const std::vector<std::size_t> coords = sample_coords(rng, wv.size(), coords_per_group);

    std::vector<double> a_sel, fd_sel;
    for (std::size_t idx : coords) {
      const double saved = wv[idx];
      wv[idx] = saved + h;
      const double fp = eval(work);
      wv[idx] = saved - h;
      const double fm = eval(work);
      wv[idx] = saved;
      a_sel.push_back(av[idx]);
      fd_sel.push_back((fp - fm) / (2.0 * h));
    }
    out.push_back(compare_group(name, a_sel, fd_sel));
  }
  return out;
}

}  // namespace grin
