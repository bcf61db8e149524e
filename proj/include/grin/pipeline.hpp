#pragma once

#include <string>
#include <vector>

#include "grin/graph.hpp"
#include "grin/losses.hpp"
#include "grin/net.hpp"
#include "grin/normalize.hpp"
#include "grin/tape.hpp"

namespace grin {

// Checkpoint / registry name of graph layer weight `layer`.
inline std::string theta_name(int layer) { return "graph/theta" + std::to_string(layer); }

// Settings for one training forward pass. freeze_grin_target switches the
// normalization target t from a live value (gradients reach the graph
// weights through the decoder input) to a fixed constant (they do not).
// Either way the target side of the content distance is held constant.
struct PipelineConfig {
  double eps = 1e-5;
  AdjacencyVariant adjacency_variant = AdjacencyVariant::gram;
  double eps_degree = 1e-8;
  Activation activation = Activation::none;
  LossWeights weights;
  bool freeze_grin_target = false;
};

// Scalar loss nodes recorded by build_loss_graph, still on the tape.
struct StepLosses {
  NodeRef content;
  NodeRef style;
  NodeRef total;
  std::vector<NodeRef> per_layer_style;
};

// Records one full training step on the tape: smoothing of the style means,
// the normalization target t, decode, re-encode, and both losses. Everything
// upstream of the trainable parameters (encoder features, statistics,
// whitening, adjacency) is computed off-tape and enters as constants.
StepLosses build_loss_graph(GradTape& tape, const Encoder& enc, const DecoderRefs& dec,
                            const std::vector<NodeRef>& thetas, const Tensor4& content_images,
                            const Tensor4& style_images, const PipelineConfig& cfg);

// Untaped normalization target t for the same images and graph weights.
// Matches the taped value bitwise; verification uses it as the fixed content
// target when probing the loss by finite differences.
Tensor4 grin_target(const Encoder& enc, const std::vector<Matrix>& thetas,
                    const Tensor4& content_images, const Tensor4& style_images,
                    const PipelineConfig& cfg);

// Untaped decode + re-encode + losses for a given target t_in (decoder
// input) and content target. style_taps are the encoder features of the
// style images.
LossReport pipeline_loss(const Encoder& enc, const DecoderParams& dec, const Tensor4& t_in,
                         const Tensor4& content_target, const std::vector<Tensor4>& style_taps,
                         const PipelineConfig& cfg);

// Inference: encode both images, normalize at the deepest tap with the
// graph layers dropped, decode. Deterministic given the decoder parameters.
Tensor4 stylize_tensor(const Encoder& enc, const DecoderParams& dec,
                       const Tensor4& content_images, const Tensor4& style_images,
                       double eps = 1e-5);

}  // namespace grin
