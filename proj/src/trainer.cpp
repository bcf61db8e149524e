#include "grin/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>

#include "grin/checkpoint.hpp"
#include "grin/errors.hpp"
#include "grin/log.hpp"
#include "grin/net.hpp"
#include "grin/synthetic.hpp"

namespace grin {

namespace {

bool finite_all(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void check_aligned(const ParamMap& a, const ParamMap& b, const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string("adam: ") + what + " holds " + std::to_string(b.size()) +
                     " entries for " + std::to_string(a.size()) + " parameters");
  }
  for (const auto& [name, value] : a) {
    auto it = b.find(name);
    if (it == b.end()) {
      throw ShapeError(std::string("adam: ") + what + " is missing '" + name + "'");
    }
    if (value.index() != it->second.index() || numel(value) != numel(it->second)) {
      throw ShapeError(std::string("adam: ") + what + " entry '" + name +
                       "' does not match the parameter shape");
    }
  }
}

std::string csv_row(int step, const LossReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", step, r.content, r.style, r.total);
  return buf;
}

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) {
    throw GrinError("train: batch_size must be >= 1, got " + std::to_string(cfg.batch_size));
  }
  if (cfg.image_size < 8 || cfg.image_size % 8 != 0) {
    throw GrinError("train: image_size must be a positive multiple of 8, got " +
                    std::to_string(cfg.image_size));
  }
  if (cfg.steps < 0) {
    throw GrinError("train: steps must be >= 0, got " + std::to_string(cfg.steps));
  }
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) {
    throw GrinError("train: lr must be positive and finite");
  }
  if (cfg.graph_layers < 1) {
    throw GrinError("train: graph_layers must be >= 1, got " +
                    std::to_string(cfg.graph_layers));
  }
  if (cfg.style_clusters < 1 || cfg.style_clusters > kMaxStyleClusters) {
    throw GrinError("train: style_clusters must be in [1, " +
                    std::to_string(kMaxStyleClusters) + "], got " +
                    std::to_string(cfg.style_clusters));
  }
  if (cfg.pipeline.weights.lambda < 0.0 || !std::isfinite(cfg.pipeline.weights.lambda)) {
    throw GrinError("train: lambda must be finite and >= 0");
  }
  if (cfg.checkpoint_every < 0) {
    throw GrinError("train: checkpoint_every must be >= 0, got " +
                    std::to_string(cfg.checkpoint_every));
  }
}

}  // namespace

void adam_step(ParamMap& params, const ParamMap& grads, AdamState& state) {
  check_aligned(params, grads, "gradient map");
  for (const auto& [name, grad] : grads) {
    if (!finite_all(param_data(grad))) {
      throw TrainError("adam: non-finite gradient for '" + name + "'",
                       static_cast<int>(state.t));
    }
  }
  if (state.m.empty() && state.v.empty()) {
    for (const auto& [name, value] : params) {
      state.m[name] = zeros_like(value);
      state.v[name] = zeros_like(value);
    }
  }
  check_aligned(params, state.m, "first-moment buffer");
  check_aligned(params, state.v, "second-moment buffer");

  state.t += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (auto& [name, value] : params) {
    std::vector<double>& p = param_data(value);
    const std::vector<double>& g = param_data(grads.at(name));
    std::vector<double>& m = param_data(state.m.at(name));
    std::vector<double>& v = param_data(state.v.at(name));
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

TrainResult train(const TrainConfig& cfg) {
  validate(cfg);

  Rng root(cfg.seed);
  Rng init_rng = root.fork(0);
  Rng data_rng = root.fork(1);

  const Encoder enc = Encoder::make();
  DecoderParams dec = DecoderParams::init(init_rng);
  GraphStack stack = GraphStack::identity_init(kFeatureChannels, cfg.graph_layers, init_rng,
                                               cfg.theta_noise, cfg.diagonal_theta);
  stack.activation = cfg.pipeline.activation;

  TrainResult result;
  result.params = dec.to_params();
  for (int l = 0; l < stack.num_layers(); ++l) {
    result.params[theta_name(l)] = stack.layers[l];
  }
  result.adam.lr = cfg.lr;

  std::ofstream trace_file;
  if (!cfg.trace_path.empty()) {
    trace_file.open(cfg.trace_path, std::ios::trunc);
    if (!trace_file) throw IoError("train: cannot open trace file '" + cfg.trace_path + "'");
    trace_file << "step,content,style,total\n";
  }

  for (int step = 1; step <= cfg.steps; ++step) {
    const SyntheticBatch batch =
        generate_batch(data_rng, cfg.batch_size, cfg.image_size, cfg.style_clusters);

    GradTape tape;
    const DecoderParams current = DecoderParams::from_params(result.params);
    const DecoderRefs dec_refs = register_decoder(tape, current);
    std::vector<NodeRef> thetas;
    for (int l = 0; l < cfg.graph_layers; ++l) {
      thetas.push_back(tape.param(theta_name(l), result.params.at(theta_name(l))));
    }

    const StepLosses losses =
        build_loss_graph(tape, enc, dec_refs, thetas, batch.content, batch.style, cfg.pipeline);
    LossReport report;
    report.content = tape.value_scalar(losses.content);
    report.style = tape.value_scalar(losses.style);
    report.total = tape.value_scalar(losses.total);
    for (NodeRef layer : losses.per_layer_style) {
      report.per_layer_style.push_back(tape.value_scalar(layer));
    }
    if (!std::isfinite(report.total)) {
      throw TrainError("train: non-finite loss at step " + std::to_string(step), step);
    }

    const ParamMap grads = tape.backward(losses.total);
    adam_step(result.params, grads, result.adam);

    result.trace.push_back(report);
    if (trace_file.is_open()) trace_file << csv_row(step, report);
    log_debug("step " + std::to_string(step) + " total " + std::to_string(report.total));

    if (!cfg.checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
        step % cfg.checkpoint_every == 0) {
      save_checkpoint(cfg.checkpoint_path, result.params, result.adam);
    }
  }

  if (trace_file.is_open()) {
    trace_file.flush();
    if (!trace_file) throw IoError("train: write to trace file '" + cfg.trace_path + "' failed");
  }
  if (!cfg.checkpoint_path.empty()) {
    save_checkpoint(cfg.checkpoint_path, result.params, result.adam);
  }
  return result;
}

std::string trace_csv(const std::vector<LossReport>& trace) {
  std::string out = "step,content,style,total\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += csv_row(static_cast<int>(i) + 1, trace[i]);
  }
  return out;
}

}  // namespace grin
