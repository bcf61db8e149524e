#pragma once

#include "grin/tensor.hpp"

namespace grin {

// Per-instance, per-channel statistics over spatial positions. The epsilon
// guard lives inside `std` (std = sqrt(variance + eps)), so downstream
// formulas never re-add it.
struct ChannelStats {
  Matrix mean;  // N x C
  Matrix std;   // N x C, every entry >= sqrt(eps)
  double eps = 0.0;
};

// mean[n,c] = (1/HW) sum x[n,c,:,:]; std = sqrt(population variance + eps).
ChannelStats compute_stats(const Tensor4& x, double eps = 1e-5);

// (x - mean) / std, one scalar pair per (instance, channel).
Tensor4 whiten(const Tensor4& x, const ChannelStats& stats);

}  // namespace grin
