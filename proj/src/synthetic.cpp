#include "grin/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "grin/errors.hpp"

namespace grin {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Each cluster owns a two-color palette, a band orientation, and a base
// frequency. Entries are spread out so any two clusters differ in at least
// two of the three.
struct ClusterSpec {
  double a[3];
  double b[3];
  double angle;  // radians
  double freq;   // bands across the image
};

constexpr ClusterSpec kClusters[kMaxStyleClusters] = {
    {{0.95, 0.35, 0.20}, {0.10, 0.05, 0.30}, 0.00, 2.0},
    {{0.15, 0.60, 0.90}, {0.95, 0.90, 0.55}, 1.10, 3.5},
    {{0.20, 0.75, 0.30}, {0.05, 0.15, 0.10}, 2.20, 5.0},
    {{0.90, 0.80, 0.10}, {0.45, 0.10, 0.55}, 0.55, 6.5},
    {{0.85, 0.85, 0.90}, {0.25, 0.30, 0.45}, 1.65, 8.0},
    {{0.70, 0.20, 0.15}, {0.95, 0.70, 0.45}, 2.75, 9.5},
    {{0.10, 0.10, 0.15}, {0.60, 0.85, 0.80}, 0.30, 11.0},
    {{0.50, 0.25, 0.70}, {0.90, 0.55, 0.25}, 1.40, 12.5},
};

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

void check_size(int size) {
  if (size < 1) {
    throw ShapeError("synthetic: image size must be >= 1, got " + std::to_string(size));
  }
}

void paint_rect(Tensor4& img, int x0, int y0, int x1, int y1, const double color[3]) {
  for (int ch = 0; ch < 3; ++ch) {
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        img.at(0, ch, y, x) = color[ch];
      }
    }
  }
}

void paint_disk(Tensor4& img, int cx, int cy, int r, const double color[3]) {
  const int size = img.h;
  const int y0 = std::max(0, cy - r), y1 = std::min(size, cy + r + 1);
  const int x0 = std::max(0, cx - r), x1 = std::min(size, cx + r + 1);
  for (int ch = 0; ch < 3; ++ch) {
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const int dx = x - cx, dy = y - cy;
        if (dx * dx + dy * dy <= r * r) img.at(0, ch, y, x) = color[ch];
      }
    }
  }
}

}  // namespace

Tensor4 content_image(Rng& rng, int size) {
  check_size(size);
  Tensor4 img(1, 3, size, size);

  double background[3];
  for (double& v : background) v = rng.uniform();
  paint_rect(img, 0, 0, size, size, background);

  const int shapes = 2 + static_cast<int>(rng.below(4));
  for (int s = 0; s < shapes; ++s) {
    double color[3];
    for (double& v : color) v = rng.uniform();
    const bool disk = rng.below(2) == 1;
    if (disk) {
      const int cx = static_cast<int>(rng.below(static_cast<std::uint64_t>(size)));
      const int cy = static_cast<int>(rng.below(static_cast<std::uint64_t>(size)));
      const int r = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(2, size / 3))));
      paint_disk(img, cx, cy, r, color);
    } else {
      const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(size)));
      const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(size)));
      const int w = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(2, size / 2))));
      const int h = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(2, size / 2))));
      paint_rect(img, x0, y0, std::min(size, x0 + w), std::min(size, y0 + h), color);
    }
  }
  return img;
}

Tensor4 style_image(Rng& rng, int size, int cluster) {
  check_size(size);
  if (cluster < 0 || cluster >= kMaxStyleClusters) {
    throw ShapeError("synthetic: style cluster must be in [0, " +
                     std::to_string(kMaxStyleClusters) + "), got " + std::to_string(cluster));
  }
  const ClusterSpec& spec = kClusters[cluster];

  // Within-cluster jitter keeps images distinct without leaving the cluster's
  // neighborhood in feature space.
  const double angle = spec.angle + rng.uniform(-0.08, 0.08);
  const double freq = spec.freq * rng.uniform(0.9, 1.1);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const double cross_phase = rng.uniform(0.0, 2.0 * kPi);
  double a[3], b[3];
  for (int ch = 0; ch < 3; ++ch) {
    a[ch] = clamp01(spec.a[ch] + rng.uniform(-0.04, 0.04));
    b[ch] = clamp01(spec.b[ch] + rng.uniform(-0.04, 0.04));
  }

  const double ca = std::cos(angle), sa = std::sin(angle);
  Tensor4 img(1, 3, size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x * ca + y * sa) / size;
      const double v = (-x * sa + y * ca) / size;
      const double band = 0.5 + 0.5 * std::sin(2.0 * kPi * freq * u + phase);
      const double cross = 0.5 + 0.5 * std::sin(kPi * freq * v + cross_phase);
      const double m = clamp01(0.75 * band + 0.25 * cross);
      for (int ch = 0; ch < 3; ++ch) {
        img.at(0, ch, y, x) = a[ch] * (1.0 - m) + b[ch] * m;
      }
    }
  }
  return img;
}

SyntheticPair generate_pair(Rng& rng, int size, int num_clusters) {
  if (num_clusters < 1 || num_clusters > kMaxStyleClusters) {
    throw ShapeError("synthetic: num_clusters must be in [1, " +
                     std::to_string(kMaxStyleClusters) + "], got " +
                     std::to_string(num_clusters));
  }
  SyntheticPair pair;
  pair.style_cluster = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_clusters)));
  pair.content = content_image(rng, size);
  pair.style = style_image(rng, size, pair.style_cluster);
  return pair;
}

SyntheticBatch generate_batch(Rng& rng, int batch, int size, int num_clusters) {
  if (batch < 1) {
    throw ShapeError("synthetic: batch must be >= 1, got " + std::to_string(batch));
  }
  SyntheticBatch out;
  out.content = Tensor4(batch, 3, size, size);
  out.style = Tensor4(batch, 3, size, size);
  out.style_clusters.reserve(static_cast<std::size_t>(batch));
  for (int i = 0; i < batch; ++i) {
    SyntheticPair pair = generate_pair(rng, size, num_clusters);
    out.style_clusters.push_back(pair.style_cluster);
    std::copy(pair.content.data.begin(), pair.content.data.end(),
              out.content.data.begin() + static_cast<std::ptrdiff_t>(pair.content.size()) * i);
    std::copy(pair.style.data.begin(), pair.style.data.end(),
              out.style.data.begin() + static_cast<std::ptrdiff_t>(pair.style.size()) * i);
  }
  return out;
}

}  // namespace grin
