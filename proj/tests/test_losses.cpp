#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "grin/errors.hpp"
#include "grin/losses.hpp"
#include "grin/rng.hpp"
#include "grin/stats.hpp"

using namespace grin;

namespace {

Tensor4 random_tensor(Rng& rng, int n, int c, int h, int w, double stdev = 1.0) {
  Tensor4 t(n, c, h, w);
  fill_normal(t, rng, stdev);
  return t;
}

}  // namespace

TEST_CASE("content loss of a tensor with itself is zero") {
  Rng rng(81);
  const Tensor4 t = random_tensor(rng, 2, 3, 4, 4);
  CHECK(content_loss(t, t) == 0.0);
}

TEST_CASE("a single unit displacement costs exactly one") {
  Rng rng(82);
  const Tensor4 t = random_tensor(rng, 2, 3, 4, 4);
  Tensor4 bumped = t;
  bumped.at(1, 2, 3, 0) += 1.0;
  CHECK(content_loss(bumped, t) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("content loss matches an element-loop sum of squares") {
  Rng rng(83);
  const Tensor4 a = random_tensor(rng, 3, 4, 5, 5);
  const Tensor4 b = random_tensor(rng, 3, 4, 5, 5);
  double expect = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    expect += d * d;
  }
  CHECK(content_loss(a, b) == doctest::Approx(expect).epsilon(1e-10));
  CHECK(content_loss(a, b, true) == doctest::Approx(expect / a.size()).epsilon(1e-10));
}

TEST_CASE("content loss is symmetric, nonnegative, and rejects shape gaps") {
  Rng rng(84);
  const Tensor4 a = random_tensor(rng, 2, 2, 3, 3);
  const Tensor4 b = random_tensor(rng, 2, 2, 3, 3);
  CHECK(content_loss(a, b) == content_loss(b, a));
  CHECK(content_loss(a, b) > 0.0);
  const Tensor4 wrong = random_tensor(rng, 2, 2, 3, 4);
  CHECK_THROWS_AS(content_loss(a, wrong), ShapeError);
}

TEST_CASE("matched features have zero style loss") {
  Rng rng(85);
  std::vector<Tensor4> feats;
  feats.push_back(random_tensor(rng, 2, 3, 8, 8));
  feats.push_back(random_tensor(rng, 2, 6, 4, 4));
  const auto [total, per_layer] = style_loss(feats, feats);
  CHECK(total == 0.0);
  REQUIRE(per_layer.size() == 2);
  for (double v : per_layer) CHECK(v == 0.0);
}

TEST_CASE("a per-channel unit mean gap costs one per channel") {
  // Alternating +/-p values share their std with the style exactly, so only
  // the mean gap of 1 per channel survives: the loss is the channel count.
  const int channels = 5;
  Tensor4 out(1, channels, 1, 2), style(1, channels, 1, 2);
  for (int c = 0; c < channels; ++c) {
    out.at(0, c, 0, 0) = 1.0 + 1.0;
    out.at(0, c, 0, 1) = 1.0 - 1.0;
    style.at(0, c, 0, 0) = 1.0;
    style.at(0, c, 0, 1) = -1.0;
  }
  const auto [total, per_layer] = style_loss({out}, {style});
  CHECK(total == doctest::Approx(static_cast<double>(channels)).epsilon(1e-12));
  REQUIRE(per_layer.size() == 1);
  CHECK(per_layer[0] == doctest::Approx(static_cast<double>(channels)).epsilon(1e-12));
}

TEST_CASE("style loss matches a compute-stats-then-loop oracle") {
  Rng rng(86);
  std::vector<Tensor4> out, style;
  out.push_back(random_tensor(rng, 3, 4, 6, 6));
  out.push_back(random_tensor(rng, 3, 8, 3, 3));
  style.push_back(random_tensor(rng, 3, 4, 5, 5, 2.0));
  style.push_back(random_tensor(rng, 3, 8, 4, 4, 0.5));

  const double eps = 1e-5;
  double expect = 0.0;
  std::vector<double> expect_layers;
  for (std::size_t l = 0; l < out.size(); ++l) {
    const ChannelStats so = compute_stats(out[l], eps);
    const ChannelStats ss = compute_stats(style[l], eps);
    double layer = 0.0;
    for (std::size_t i = 0; i < so.mean.size(); ++i) {
      const double dm = so.mean.data[i] - ss.mean.data[i];
      const double ds = so.std.data[i] - ss.std.data[i];
      layer += dm * dm + ds * ds;
    }
    expect_layers.push_back(layer);
    expect += layer;
  }

  const auto [total, per_layer] = style_loss(out, style, eps);
  CHECK(total == doctest::Approx(expect).epsilon(1e-9));
  REQUIRE(per_layer.size() == expect_layers.size());
  for (std::size_t l = 0; l < per_layer.size(); ++l) {
    CHECK(per_layer[l] == doctest::Approx(expect_layers[l]).epsilon(1e-9));
  }
}

TEST_CASE("style loss sees only channel statistics, not pixel placement") {
  Rng rng(87);
  const Tensor4 style = random_tensor(rng, 2, 3, 4, 4);
  Tensor4 out = random_tensor(rng, 2, 3, 4, 4);
  Tensor4 shuffled = out;
  for (int n = 0; n < 2; ++n) {
    for (int c = 0; c < 3; ++c) {
      double* plane = &shuffled.data[shuffled.index(n, c, 0, 0)];
      std::reverse(plane, plane + 16);
    }
  }
  const auto [a, a_layers] = style_loss({out}, {style});
  const auto [b, b_layers] = style_loss({shuffled}, {style});
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("style loss rejects mismatched layer lists") {
  Rng rng(88);
  const Tensor4 a = random_tensor(rng, 2, 3, 4, 4);
  const Tensor4 b = random_tensor(rng, 2, 3, 4, 4);
  CHECK_THROWS_AS(style_loss({a, b}, {a}), ShapeError);
  const Tensor4 wrong_c = random_tensor(rng, 2, 4, 4, 4);
  CHECK_THROWS_AS(style_loss({a}, {wrong_c}), ShapeError);
}

TEST_CASE("total loss is the weighted sum") {
  LossWeights w;
  CHECK(w.lambda == 10.0);
  CHECK(total_loss(0.0, 0.0, w) == 0.0);
  CHECK(total_loss(2.0, 0.5, w) == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("doubling lambda doubles the style contribution exactly") {
  LossWeights w;
  w.lambda = 3.0;
  const double base = total_loss(1.5, 0.25, w);
  w.lambda = 6.0;
  const double doubled = total_loss(1.5, 0.25, w);
  CHECK(doubled - 1.5 == doctest::Approx(2.0 * (base - 1.5)).epsilon(1e-15));
  CHECK(total_loss(0.0, 0.25, w) == doctest::Approx(6.0 * 0.25).epsilon(1e-15));
}

TEST_CASE("style loss is nonnegative and zero only for matching statistics") {
  Rng rng(89);
  const Tensor4 style = random_tensor(rng, 2, 3, 4, 4);
  const Tensor4 out = random_tensor(rng, 2, 3, 4, 4, 1.3);
  const auto [differing, d_layers] = style_loss({out}, {style});
  CHECK(differing > 0.0);

  Tensor4 same_stats = style;
  for (int n = 0; n < 2; ++n) {
    for (int c = 0; c < 3; ++c) {
      double* plane = &same_stats.data[same_stats.index(n, c, 0, 0)];
      std::reverse(plane, plane + 16);
    }
  }
  const auto [matched, m_layers] = style_loss({same_stats}, {style});
  CHECK(matched < 1e-18);
}
