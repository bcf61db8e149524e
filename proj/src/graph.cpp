#include "grin/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "grin/errors.hpp"

namespace grin {

GraphStack GraphStack::identity_init(int channels, int num_layers, Rng& rng, double noise_scale,
                                     bool diagonal) {
  GraphStack stack;
  stack.diagonal_theta = diagonal;
  for (int l = 0; l < num_layers; ++l) {
    Matrix theta = Matrix::identity(channels);
    if (noise_scale > 0.0) {
      for (int r = 0; r < channels; ++r) {
        for (int c = 0; c < channels; ++c) {
          if (diagonal && r != c) continue;
          theta.at(r, c) += rng.normal(0.0, noise_scale);
        }
      }
    }
    stack.layers.push_back(std::move(theta));
  }
  return stack;
}

AdjacencyMatrix build_adjacency(const Tensor4& y, AdjacencyVariant variant, double eps_degree) {
  Matrix feats = flatten_batch(y);
  if (variant == AdjacencyVariant::cosine) {
    for (int r = 0; r < feats.rows; ++r) {
      double* row = &feats.data[static_cast<std::size_t>(r) * feats.cols];
      double norm_sq = 0.0;
      for (int j = 0; j < feats.cols; ++j) norm_sq += row[j] * row[j];
      if (norm_sq > 0.0) {
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (int j = 0; j < feats.cols; ++j) row[j] *= inv;
      }
    }
  }

  const int n = feats.rows;
  AdjacencyMatrix adj;
  adj.a_tilde = Matrix(n, n);
  // Each pairwise product is computed once and mirrored so the matrix is
  // exactly symmetric.
  for (int i = 0; i < n; ++i) {
    const double* ri = &feats.data[static_cast<std::size_t>(i) * feats.cols];
    for (int j = i; j < n; ++j) {
      const double* rj = &feats.data[static_cast<std::size_t>(j) * feats.cols];
      double dot = 0.0;
      for (int k = 0; k < feats.cols; ++k) dot += ri[k] * rj[k];
      adj.a_tilde.at(i, j) = dot;
      adj.a_tilde.at(j, i) = dot;
    }
  }
  require_finite(adj.a_tilde, "build_adjacency");

  adj.degree.resize(n);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) sum += adj.a_tilde.at(i, j);
    adj.degree[i] = std::max(sum, eps_degree);
  }

  adj.propagation = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double p = adj.a_tilde.at(i, j) / std::sqrt(adj.degree[i] * adj.degree[j]);
      adj.propagation.at(i, j) = p;
      adj.propagation.at(j, i) = p;
    }
  }
  require_finite(adj.propagation, "build_adjacency");
  return adj;
}

Matrix gcn_layer(const Matrix& nodes, const AdjacencyMatrix& adj, const Matrix& theta) {
  if (adj.propagation.cols != nodes.rows) {
    std::ostringstream os;
    os << "gcn_layer: propagation is " << adj.propagation.rows << "x" << adj.propagation.cols
       << " but nodes have " << nodes.rows << " rows";
    throw ShapeError(os.str());
  }
  if (theta.rows != nodes.cols) {
    std::ostringstream os;
    os << "gcn_layer: theta is " << theta.rows << "x" << theta.cols << " but nodes have "
       << nodes.cols << " columns";
    throw ShapeError(os.str());
  }
  return matmul(matmul(adj.propagation, nodes), theta);
}

Matrix smooth_means(const Matrix& mu_y, const AdjacencyMatrix& adj, const GraphStack& stack) {
  if (stack.mode != StackMode::train) {
    throw ModeError("smooth_means: stack is in infer mode; inference bypasses graph smoothing");
  }
  Matrix h = mu_y;
  for (int l = 0; l < stack.num_layers(); ++l) {
    h = gcn_layer(h, adj, stack.layers[l]);
    if (stack.activation == Activation::rectifier && l + 1 < stack.num_layers()) {
      for (double& v : h.data) v = std::max(v, 0.0);
    }
  }
  return h;
}

}  // namespace grin
