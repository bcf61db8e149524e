#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "grin/tensor.hpp"

namespace grin {

// A named trainable value: rank-4 (conv kernels) or rank-2 (graph weights,
// conv biases stored as 1 x C).
using ParamValue = std::variant<Tensor4, Matrix>;

// Ordered by name, so iteration (checkpoints, optimizer sweeps) is
// deterministic.
using ParamMap = std::map<std::string, ParamValue>;

std::size_t numel(const ParamValue& v);
std::vector<double>& param_data(ParamValue& v);
const std::vector<double>& param_data(const ParamValue& v);
ParamValue zeros_like(const ParamValue& v);

// Handle to a value recorded on a GradTape.
struct NodeRef {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode gradient tape over the fixed op set the pipeline needs.
// Nodes are appended in forward order, which is a topological order of the
// computation, so the backward sweep is a single reverse pass. Constants
// never receive gradients; backward() returns one gradient per registered
// parameter and then clears the tape.
class GradTape {
 public:
  // Leaves.
  NodeRef constant(const Tensor4& v);
  NodeRef constant(const Matrix& v);
  NodeRef constant_scalar(double v);
  NodeRef param(const std::string& name, const Tensor4& v);
  NodeRef param(const std::string& name, const Matrix& v);
  NodeRef param(const std::string& name, const ParamValue& v);

  // Primitives. Convolutions use odd kernels with same padding.
  NodeRef conv2d(NodeRef x, NodeRef weight, NodeRef bias);
  NodeRef relu(NodeRef x);
  NodeRef avg_pool2(NodeRef x);
  NodeRef upsample2(NodeRef x);
  NodeRef channel_mean(NodeRef x);                      // Tensor4 -> N x C
  NodeRef channel_std(NodeRef x, double eps);           // Tensor4 -> N x C
  NodeRef whiten(NodeRef x, NodeRef mean, NodeRef stdev);
  NodeRef scale_bias(NodeRef x, NodeRef stdev, NodeRef mean);
  NodeRef matmul(NodeRef a, NodeRef b);
  NodeRef sum_sq_diff(NodeRef a, NodeRef b, double scale = 1.0);  // -> scalar
  NodeRef add(NodeRef a, NodeRef b);                    // scalars
  NodeRef scale(NodeRef a, double factor);              // scalar
  NodeRef dot(NodeRef x, const std::vector<double>& weights);     // -> scalar

  // Value access (copies).
  Tensor4 value4(NodeRef r) const;
  Matrix value2(NodeRef r) const;
  double value_scalar(NodeRef r) const;

  // Seeds the reverse sweep at `loss` (a scalar node) with loss_seed and
  // returns gradients for every registered parameter. The tape is cleared
  // afterwards; calling backward again without a new forward pass throws
  // StateError.
  ParamMap backward(NodeRef loss, double loss_seed = 1.0);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t param_count() const { return param_ids_.size(); }
  bool empty() const { return nodes_.empty(); }
  void clear();

 private:
  struct Shape {
    int rank = 0;  // 0 scalar, 2 matrix, 4 tensor
    int d0 = 1, d1 = 1, d2 = 1, d3 = 1;
    std::size_t numel() const;
    bool operator==(const Shape&) const = default;
  };

  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated during backward for needs_grad nodes
    bool needs_grad = false;
    std::string param_name;
    std::function<void(GradTape&)> backward;
  };

  NodeRef push(Shape shape, std::vector<double> value, bool needs_grad,
               std::function<void(GradTape&)> bwd, std::string param_name = {});
  const Node& node(NodeRef r) const;
  Node& node_mut(NodeRef r);
  const Node& checked(NodeRef r, int rank, const char* op) const;
  bool wants(int id) const { return nodes_[id].needs_grad; }
  std::vector<double>& grad_of(int id) { return nodes_[id].grad; }
  const std::vector<double>& val_of(int id) const { return nodes_[id].value; }
  const Shape& shape_of(int id) const { return nodes_[id].shape; }

  std::vector<Node> nodes_;
  std::map<std::string, int> param_ids_;
};

}  // namespace grin
