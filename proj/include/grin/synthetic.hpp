#pragma once

#include <vector>

#include "grin/rng.hpp"
#include "grin/tensor.hpp"

namespace grin {

// Procedural stand-ins for a photo/painting corpus. Content images are flat
// backgrounds with a few solid shapes; style images are sinusoidal color
// fields drawn from a small number of discrete clusters, so styles inside a
// cluster genuinely resemble each other and the batch graph has block
// structure to exploit.
inline constexpr int kMaxStyleClusters = 8;

struct SyntheticPair {
  Tensor4 content;  // 1 x 3 x size x size, values in [0,1]
  Tensor4 style;    // 1 x 3 x size x size, values in [0,1]
  int style_cluster = 0;
};

struct SyntheticBatch {
  Tensor4 content;  // N x 3 x size x size
  Tensor4 style;    // N x 3 x size x size
  std::vector<int> style_clusters;
};

// A content image: flat background plus 2-5 axis-aligned rectangles and
// disks in solid colors.
Tensor4 content_image(Rng& rng, int size);

// A style image from the given cluster: banded color field with the
// cluster's palette, orientation, and frequency, plus small within-cluster
// jitter.
Tensor4 style_image(Rng& rng, int size, int cluster);

SyntheticPair generate_pair(Rng& rng, int size, int num_clusters = 4);

SyntheticBatch generate_batch(Rng& rng, int batch, int size, int num_clusters = 4);

}  // namespace grin
