#pragma once

#include <vector>

#include "grin/tensor.hpp"

namespace grin {

// How the N x N similarity matrix is formed from the flattened style
// features. `gram` takes the raw product X'X'^T; `cosine` unit-normalizes
// each row of X' first, which keeps entries independent of feature
// magnitude.
enum class AdjacencyVariant { gram, cosine };

// Similarity graph over the instances of a mini-batch, plus its symmetric
// degree normalization.
struct AdjacencyMatrix {
  Matrix a_tilde;              // N x N, symmetric
  std::vector<double> degree;  // row sums, clamped to >= eps_degree
  Matrix propagation;          // D^{-1/2} A D^{-1/2}, symmetric
};

enum class Activation { none, rectifier };
enum class StackMode { train, infer };

// The learnable graph-layer weights and the smoothing configuration.
// Each layer weight is C x C; a diagonal initialization reproduces the
// per-channel-scalar reading of the layer weight.
struct GraphStack {
  std::vector<Matrix> layers;
  Activation activation = Activation::none;
  StackMode mode = StackMode::train;
  bool diagonal_theta = false;

  int num_layers() const { return static_cast<int>(layers.size()); }

  // Identity plus small zero-mean noise, so an untrained stack behaves like
  // plain instance statistics. noise_scale 0 gives exact identities.
  static GraphStack identity_init(int channels, int num_layers, Rng& rng,
                                  double noise_scale = 1e-2, bool diagonal = false);
};

// Builds the batch similarity graph from style features y. Degrees are
// clamped at eps_degree so an all-zero feature row cannot produce 0^{-1/2}.
AdjacencyMatrix build_adjacency(const Tensor4& y,
                                AdjacencyVariant variant = AdjacencyVariant::gram,
                                double eps_degree = 1e-8);

// One first-order graph convolution: propagation * nodes * theta.
Matrix gcn_layer(const Matrix& nodes, const AdjacencyMatrix& adj, const Matrix& theta);

// Applies every layer of the stack to the style means (train mode only;
// inference bypasses smoothing entirely). The configured activation is
// applied between layers, never after the last one.
Matrix smooth_means(const Matrix& mu_y, const AdjacencyMatrix& adj, const GraphStack& stack);

}  // namespace grin
