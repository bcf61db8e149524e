#include "grin/pipeline.hpp"

#include "grin/errors.hpp"
#include "grin/stats.hpp"

namespace grin {

namespace {

GraphStack stack_from(const std::vector<Matrix>& thetas, Activation activation) {
  GraphStack stack;
  stack.layers = thetas;
  stack.activation = activation;
  stack.mode = StackMode::train;
  return stack;
}

void check_style_layers(const LossWeights& w, std::size_t available) {
  if (w.style_layers.empty()) {
    throw ShapeError("style loss: at least one layer is required");
  }
  for (int idx : w.style_layers) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= available) {
      throw ShapeError("style loss: layer index " + std::to_string(idx) +
                       " is outside the encoder's tap range");
    }
  }
}

}  // namespace

StepLosses build_loss_graph(GradTape& tape, const Encoder& enc, const DecoderRefs& dec,
                            const std::vector<NodeRef>& thetas, const Tensor4& content_images,
                            const Tensor4& style_images, const PipelineConfig& cfg) {
  check_style_layers(cfg.weights, 4);

  const EncoderFeatures fc = enc.forward(content_images);
  const EncoderFeatures fs = enc.forward(style_images);
  const Tensor4& x = fc.taps.back();
  const Tensor4& y = fs.taps.back();

  const ChannelStats sx = compute_stats(x, cfg.eps);
  const ChannelStats sy = compute_stats(y, cfg.eps);
  const Tensor4 whitened = whiten(x, sx);
  const AdjacencyMatrix adj = build_adjacency(y, cfg.adjacency_variant, cfg.eps_degree);

  NodeRef t_node;
  Tensor4 t_value;
  if (cfg.freeze_grin_target) {
    std::vector<Matrix> theta_values;
    for (NodeRef ref : thetas) theta_values.push_back(tape.value2(ref));
    const Matrix smoothed = smooth_means(sy.mean, adj, stack_from(theta_values, cfg.activation));
    t_value = apply_scale_bias(whitened, sy.std, smoothed);
    t_node = tape.constant(t_value);
  } else {
    NodeRef nodes = tape.constant(sy.mean);
    const NodeRef prop = tape.constant(adj.propagation);
    const int layers = static_cast<int>(thetas.size());
    for (int l = 0; l < layers; ++l) {
      nodes = tape.matmul(tape.matmul(prop, nodes), thetas[l]);
      if (cfg.activation == Activation::rectifier && l + 1 < layers) {
        nodes = tape.relu(nodes);
      }
    }
    t_node = tape.scale_bias(tape.constant(whitened), tape.constant(sy.std), nodes);
    t_value = tape.value4(t_node);
  }

  const NodeRef out_img = decoder_forward_taped(tape, t_node, dec);
  const std::vector<NodeRef> reenc = enc.forward_taped(tape, out_img);

  StepLosses losses;
  const double content_factor =
      cfg.weights.mean_reduce ? 1.0 / static_cast<double>(t_value.size()) : 1.0;
  losses.content = tape.sum_sq_diff(reenc.back(), tape.constant(t_value), content_factor);

  NodeRef style_total;
  for (std::size_t i = 0; i < cfg.weights.style_layers.size(); ++i) {
    const int tap = cfg.weights.style_layers[i];
    const ChannelStats target = compute_stats(fs.taps[tap], cfg.eps);
    const double layer_factor =
        cfg.weights.mean_reduce ? 1.0 / static_cast<double>(target.mean.size()) : 1.0;
    const NodeRef mean_gap = tape.sum_sq_diff(tape.channel_mean(reenc[tap]),
                                              tape.constant(target.mean), layer_factor);
    const NodeRef std_gap = tape.sum_sq_diff(tape.channel_std(reenc[tap], cfg.eps),
                                             tape.constant(target.std), layer_factor);
    const NodeRef layer = tape.add(mean_gap, std_gap);
    losses.per_layer_style.push_back(layer);
    style_total = (i == 0) ? layer : tape.add(style_total, layer);
  }
  losses.style = style_total;
  losses.total = tape.add(losses.content, tape.scale(losses.style, cfg.weights.lambda));
  return losses;
}

Tensor4 grin_target(const Encoder& enc, const std::vector<Matrix>& thetas,
                    const Tensor4& content_images, const Tensor4& style_images,
                    const PipelineConfig& cfg) {
  const EncoderFeatures fc = enc.forward(content_images);
  const EncoderFeatures fs = enc.forward(style_images);
  const GraphStack stack = stack_from(thetas, cfg.activation);
  GrinConfig gcfg;
  gcfg.eps = cfg.eps;
  gcfg.mode = Mode::train;
  gcfg.adjacency_variant = cfg.adjacency_variant;
  gcfg.eps_degree = cfg.eps_degree;
  gcfg.stack = &stack;
  return grin(fc.taps.back(), fs.taps.back(), gcfg);
}

LossReport pipeline_loss(const Encoder& enc, const DecoderParams& dec, const Tensor4& t_in,
                         const Tensor4& content_target, const std::vector<Tensor4>& style_taps,
                         const PipelineConfig& cfg) {
  check_style_layers(cfg.weights, style_taps.size());

  const Tensor4 out_img = decoder_forward(t_in, dec);
  const EncoderFeatures reenc = enc.forward(out_img);

  std::vector<Tensor4> out_sel, style_sel;
  for (int tap : cfg.weights.style_layers) {
    out_sel.push_back(reenc.taps[tap]);
    style_sel.push_back(style_taps[tap]);
  }

  LossReport report;
  report.content = content_loss(reenc.taps.back(), content_target, cfg.weights.mean_reduce);
  auto [style_total, per_layer] = style_loss(out_sel, style_sel, cfg.eps, cfg.weights.mean_reduce);
  report.style = style_total;
  report.per_layer_style = std::move(per_layer);
  report.total = total_loss(report.content, report.style, cfg.weights);
  return report;
}

Tensor4 stylize_tensor(const Encoder& enc, const DecoderParams& dec,
                       const Tensor4& content_images, const Tensor4& style_images, double eps) {
  const EncoderFeatures fc = enc.forward(content_images);
  const EncoderFeatures fs = enc.forward(style_images);
  GrinConfig cfg;
  cfg.eps = eps;
  cfg.mode = Mode::infer;
  const Tensor4 t = grin(fc.taps.back(), fs.taps.back(), cfg);
  return decoder_forward(t, dec);
}

}  // namespace grin
