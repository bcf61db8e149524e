#pragma once

#include <utility>
#include <vector>

#include "grin/tensor.hpp"

namespace grin {

// Training objective weights. Norms default to plain sums of squares; the
// mean_reduce switch divides each term by its element count and exists only
// as a stability knob.
struct LossWeights {
  double lambda = 10.0;
  std::vector<int> style_layers = {0, 1, 2, 3};  // encoder tap indices
  bool mean_reduce = false;
};

struct LossReport {
  double content = 0.0;
  double style = 0.0;
  double total = 0.0;
  std::vector<double> per_layer_style;
};

// Squared Euclidean distance summed over all elements.
double content_loss(const Tensor4& reencoded_t, const Tensor4& t, bool mean_reduce = false);

// Sum over layers of squared mean and std statistic gaps. Returns the total
// and the per-layer contributions.
std::pair<double, std::vector<double>> style_loss(const std::vector<Tensor4>& output_feats,
                                                  const std::vector<Tensor4>& style_feats,
                                                  double eps = 1e-5, bool mean_reduce = false);

double total_loss(double content, double style, const LossWeights& w);

}  // namespace grin
