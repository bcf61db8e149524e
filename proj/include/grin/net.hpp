#pragma once

#include <cstdint>
#include <vector>

#include "grin/tape.hpp"
#include "grin/tensor.hpp"

namespace grin {

// Plain forward ops shared by the taped and untaped paths. conv2d uses an
// odd square kernel with zero padding that preserves the spatial size.
Tensor4 conv2d(const Tensor4& x, const Tensor4& kernel, const Matrix& bias);
Tensor4 relu(const Tensor4& x);
Tensor4 avg_pool2(const Tensor4& x);
Tensor4 upsample2(const Tensor4& x);

// Seed for the frozen feature extractor. Changing it changes the perceptual
// space and invalidates every checkpoint, so it is a named constant rather
// than configuration.
inline constexpr std::uint64_t kEncoderSeed = 0x6772494E;

// Channel count of the deepest encoder tap, which is also the node feature
// width of the batch graph and the size of each graph layer weight.
inline constexpr int kFeatureChannels = 64;

// Activations at the four depths used for statistics, shallowest first.
struct EncoderFeatures {
  std::vector<Tensor4> taps;
};

// Fixed random conv feature extractor: four blocks of 3x3 conv + rectifier
// with 2x average pooling between blocks, channels 3 -> 8 -> 16 -> 32 -> 64.
// Weights are drawn once from the seeded generator and never trained.
struct Encoder {
  std::vector<Tensor4> kernels;
  std::vector<Matrix> biases;
  std::uint64_t seed = kEncoderSeed;

  static Encoder make(std::uint64_t seed = kEncoderSeed);

  // Input must have 3 channels and spatial size divisible by 8. Tap spatial
  // sizes are S, S/2, S/4, S/8.
  EncoderFeatures forward(const Tensor4& img) const;

  // Same computation recorded on a tape, with the weights entered as
  // constants: gradients flow through the encoder but never into it.
  std::vector<NodeRef> forward_taped(GradTape& tape, NodeRef img) const;
};

// Trainable decoder mirroring the encoder: three blocks of 3x3 conv +
// rectifier + nearest-neighbor 2x upsample (64 -> 32 -> 16 -> 8 channels),
// then a final 3-channel conv with no activation.
struct DecoderParams {
  std::vector<Tensor4> kernels;
  std::vector<Matrix> biases;

  static DecoderParams init(Rng& rng);

  // Named flat views for the optimizer and checkpoints.
  ParamMap to_params() const;
  static DecoderParams from_params(const ParamMap& params);
};

// Handles returned by register_decoder, in layer order.
struct DecoderRefs {
  std::vector<NodeRef> kernels;
  std::vector<NodeRef> biases;
};

// Registers every decoder parameter on the tape under its checkpoint name.
DecoderRefs register_decoder(GradTape& tape, const DecoderParams& params);

// Untaped decoder pass; input must match the deepest encoder tap layout.
Tensor4 decoder_forward(const Tensor4& t, const DecoderParams& params);

// Taped decoder pass over previously registered (or constant) layer weights.
NodeRef decoder_forward_taped(GradTape& tape, NodeRef t, const DecoderRefs& refs);

}  // namespace grin
