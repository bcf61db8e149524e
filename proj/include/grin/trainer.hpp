#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grin/losses.hpp"
#include "grin/pipeline.hpp"
#include "grin/tape.hpp"

namespace grin {

// Adam with bias correction. Moment buffers are keyed by parameter name and
// allocated on first use; a parameter whose gradient stays exactly zero is
// never moved.
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;  // completed steps
  ParamMap m;
  ParamMap v;
};

// One in-place update. Throws TrainError (with the parameter path in the
// message) on a non-finite gradient, ShapeError on a params/grads mismatch.
void adam_step(ParamMap& params, const ParamMap& grads, AdamState& state);

struct TrainConfig {
  int batch_size = 8;
  int image_size = 32;
  int steps = 500;
  std::uint64_t seed = 0;
  double lr = 1e-4;
  int graph_layers = 2;
  double theta_noise = 1e-2;
  bool diagonal_theta = false;
  int style_clusters = 4;
  PipelineConfig pipeline;

  // Side outputs. Empty paths disable the file; checkpoint_every 0 writes
  // only the final checkpoint.
  std::string checkpoint_path;
  int checkpoint_every = 0;
  std::string trace_path;
};

struct TrainResult {
  ParamMap params;  // decoder conv layers plus graph weights
  AdamState adam;
  std::vector<LossReport> trace;  // one entry per completed step
};

// Full training loop: synthetic batches, the taped forward pass, backward,
// Adam. Deterministic for a fixed config. Throws TrainError with the step
// index if the loss leaves the finite range; a checkpoint already written
// for an earlier step is left in place.
TrainResult train(const TrainConfig& cfg);

// The trace rows as written to the trace file: a header line followed by
// one "step,content,style,total" row per step, every value in %.17g.
std::string trace_csv(const std::vector<LossReport>& trace);

}  // namespace grin
