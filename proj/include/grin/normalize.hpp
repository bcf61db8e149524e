#pragma once

#include "grin/graph.hpp"
#include "grin/stats.hpp"
#include "grin/tensor.hpp"

namespace grin {

enum class Mode { train, infer };

// Configuration for the graph-smoothed normalization. In infer mode the
// graph stack is never touched and the op reduces exactly to adain.
struct GrinConfig {
  double eps = 1e-5;
  Mode mode = Mode::train;
  AdjacencyVariant adjacency_variant = AdjacencyVariant::gram;
  double eps_degree = 1e-8;
  const GraphStack* stack = nullptr;  // required in train mode
};

// out[n,c,:,:] = whitened[n,c,:,:] * stdev[n,c] + mean[n,c].
Tensor4 apply_scale_bias(const Tensor4& whitened, const Matrix& stdev, const Matrix& mean);

// Adaptive instance normalization: whiten content features with their own
// statistics, then re-scale and re-bias with the style's per-channel
// statistics. Spatial sizes of x and y may differ.
Tensor4 adain(const Tensor4& x, const Tensor4& y, double eps = 1e-5);

// Graph instance normalization. Train mode smooths the style means across
// the batch graph before using them as the bias; the scale is always the
// unsmoothed style std. Infer mode is identical to adain.
Tensor4 grin(const Tensor4& x, const Tensor4& y, const GrinConfig& cfg);

}  // namespace grin
