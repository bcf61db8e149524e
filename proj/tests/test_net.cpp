#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "grin/errors.hpp"
#include "grin/net.hpp"
#include "grin/rng.hpp"
#include "grin/tape.hpp"

using namespace grin;

namespace {

// Reference ops written as direct nested loops, deliberately independent of
// the library implementations they are checked against.
Tensor4 ref_conv(const Tensor4& x, const Tensor4& k, const Matrix& b) {
  const int pad = k.h / 2;
  Tensor4 out(x.n, k.n, x.h, x.w);
  for (int n = 0; n < x.n; ++n) {
    for (int co = 0; co < k.n; ++co) {
      for (int y = 0; y < x.h; ++y) {
        for (int xo = 0; xo < x.w; ++xo) {
          double acc = b.at(0, co);
          for (int ci = 0; ci < x.c; ++ci) {
            for (int ky = 0; ky < k.h; ++ky) {
              for (int kx = 0; kx < k.w; ++kx) {
                const int iy = y + ky - pad;
                const int ix = xo + kx - pad;
                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                acc += k.at(co, ci, ky, kx) * x.at(n, ci, iy, ix);
              }
            }
          }
          out.at(n, co, y, xo) = acc;
        }
      }
    }
  }
  return out;
}

Tensor4 ref_relu(const Tensor4& x) {
  Tensor4 out = x;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor4 ref_pool(const Tensor4& x) {
  Tensor4 out(x.n, x.c, x.h / 2, x.w / 2);
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      for (int y = 0; y < out.h; ++y) {
        for (int xo = 0; xo < out.w; ++xo) {
          out.at(n, c, y, xo) = 0.25 * (x.at(n, c, 2 * y, 2 * xo) + x.at(n, c, 2 * y, 2 * xo + 1) +
                                        x.at(n, c, 2 * y + 1, 2 * xo) +
                                        x.at(n, c, 2 * y + 1, 2 * xo + 1));
        }
      }
    }
  }
  return out;
}

Tensor4 ref_upsample(const Tensor4& x) {
  Tensor4 out(x.n, x.c, x.h * 2, x.w * 2);
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      for (int y = 0; y < out.h; ++y) {
        for (int xo = 0; xo < out.w; ++xo) out.at(n, c, y, xo) = x.at(n, c, y / 2, xo / 2);
      }
    }
  }
  return out;
}

void require_close(const Tensor4& got, const Tensor4& want, double tol) {
  REQUIRE(got.same_shape(want));
  for (std::size_t i = 0; i < got.size(); ++i) {
    REQUIRE(got.data[i] == doctest::Approx(want.data[i]).epsilon(tol));
  }
}

}  // namespace

TEST_CASE("the first tap of a zero image is the rectified bias") {
  const Encoder enc = Encoder::make();
  const Tensor4 zero(1, 3, 16, 16, 0.0);
  const EncoderFeatures feats = enc.forward(zero);
  const Tensor4& tap = feats.taps[0];
  for (int c = 0; c < tap.c; ++c) {
    const double expect = std::max(enc.biases[0].at(0, c), 0.0);
    for (int y = 0; y < tap.h; ++y) {
      for (int x = 0; x < tap.w; ++x) REQUIRE(tap.at(0, c, y, x) == expect);
    }
  }
}

TEST_CASE("the encoder matches a loop-oracle replay of its blocks") {
  const Encoder enc = Encoder::make();
  Rng rng(101);
  Tensor4 img(2, 3, 8, 8);
  fill_uniform(img, rng, 0.0, 1.0);
  const EncoderFeatures feats = enc.forward(img);
  REQUIRE(feats.taps.size() == 4);

  Tensor4 cur = img;
  for (int i = 0; i < 4; ++i) {
    if (i > 0) cur = ref_pool(cur);
    cur = ref_relu(ref_conv(cur, enc.kernels[i], enc.biases[i]));
    require_close(feats.taps[i], cur, 1e-12);
  }
}

TEST_CASE("encoding is deterministic and seed-bound") {
  const Encoder a = Encoder::make();
  const Encoder b = Encoder::make();
  REQUIRE(a.kernels.size() == b.kernels.size());
  for (std::size_t i = 0; i < a.kernels.size(); ++i) {
    REQUIRE(a.kernels[i].data == b.kernels[i].data);
    REQUIRE(a.biases[i].data == b.biases[i].data);
  }

  Rng rng(102);
  Tensor4 img(1, 3, 8, 8);
  fill_uniform(img, rng, 0.0, 1.0);
  const EncoderFeatures fa = a.forward(img);
  const EncoderFeatures fb = b.forward(img);
  for (int i = 0; i < 4; ++i) REQUIRE(fa.taps[i].data == fb.taps[i].data);

  const Encoder other = Encoder::make(1234);
  CHECK(other.kernels[0].data != a.kernels[0].data);
}

TEST_CASE("a 32x32 image produces the declared tap schedule") {
  const Encoder enc = Encoder::make();
  Tensor4 img(2, 3, 32, 32, 0.5);
  const EncoderFeatures feats = enc.forward(img);
  REQUIRE(feats.taps.size() == 4);
  const int sizes[] = {32, 16, 8, 4};
  const int channels[] = {8, 16, 32, 64};
  for (int i = 0; i < 4; ++i) {
    CHECK(feats.taps[i].n == 2);
    CHECK(feats.taps[i].c == channels[i]);
    CHECK(feats.taps[i].h == sizes[i]);
    CHECK(feats.taps[i].w == sizes[i]);
  }
  CHECK(feats.taps.back().c == kFeatureChannels);
}

TEST_CASE("the encoder rejects malformed inputs") {
  const Encoder enc = Encoder::make();
  CHECK_THROWS_AS(enc.forward(Tensor4(1, 4, 16, 16, 0.0)), ShapeError);
  CHECK_THROWS_AS(enc.forward(Tensor4(1, 3, 12, 16, 0.0)), ShapeError);
  CHECK_THROWS_AS(enc.forward(Tensor4(1, 3, 16, 20, 0.0)), ShapeError);
}

TEST_CASE("the decoder maps the deepest tap back to image shape") {
  Rng rng(103);
  const DecoderParams dec = DecoderParams::init(rng);
  Tensor4 t(1, 64, 4, 4);
  fill_normal(t, rng, 1.0);
  const Tensor4 out = decoder_forward(t, dec);
  CHECK(out.n == 1);
  CHECK(out.c == 3);
  CHECK(out.h == 32);
  CHECK(out.w == 32);
}

TEST_CASE("the decoder matches a loop-oracle replay of its blocks") {
  Rng rng(104);
  const DecoderParams dec = DecoderParams::init(rng);
  Tensor4 t(2, 64, 2, 2);
  fill_normal(t, rng, 1.0);
  const Tensor4 got = decoder_forward(t, dec);

  Tensor4 cur = t;
  for (int i = 0; i < 3; ++i) {
    cur = ref_upsample(ref_relu(ref_conv(cur, dec.kernels[i], dec.biases[i])));
  }
  const Tensor4 want = ref_conv(cur, dec.kernels[3], dec.biases[3]);
  require_close(got, want, 1e-12);
}

TEST_CASE("with zero weights the decoder output is the final bias") {
  Rng rng(105);
  DecoderParams dec = DecoderParams::init(rng);
  for (Tensor4& k : dec.kernels) std::fill(k.data.begin(), k.data.end(), 0.0);
  for (Matrix& b : dec.biases) std::fill(b.data.begin(), b.data.end(), 0.0);
  dec.biases[3].data = {0.3, -0.2, 0.7};

  Tensor4 t(1, 64, 2, 2);
  fill_normal(t, rng, 1.0);
  const Tensor4 out = decoder_forward(t, dec);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) REQUIRE(out.at(0, c, y, x) == dec.biases[3].at(0, c));
    }
  }
}

TEST_CASE("the decoder rejects inputs that do not match its first layer") {
  Rng rng(106);
  const DecoderParams dec = DecoderParams::init(rng);
  Tensor4 wrong(1, 32, 4, 4);
  fill_normal(wrong, rng, 1.0);
  CHECK_THROWS_AS(decoder_forward(wrong, dec), ShapeError);
}

TEST_CASE("the taped decoder pass agrees with the untaped one") {
  Rng rng(107);
  const DecoderParams dec = DecoderParams::init(rng);
  Tensor4 t(1, 64, 2, 2);
  fill_normal(t, rng, 1.0);
  const Tensor4 plain = decoder_forward(t, dec);

  GradTape tape;
  const DecoderRefs refs = register_decoder(tape, dec);
  const NodeRef out = decoder_forward_taped(tape, tape.constant(t), refs);
  require_close(tape.value4(out), plain, 1e-12);
}

TEST_CASE("registering the decoder creates exactly its eight parameters") {
  Rng rng(108);
  const DecoderParams dec = DecoderParams::init(rng);
  GradTape tape;
  const DecoderRefs refs = register_decoder(tape, dec);
  CHECK(tape.param_count() == 8);
  CHECK(refs.kernels.size() == 4);
  CHECK(refs.biases.size() == 4);

  const ParamMap params = dec.to_params();
  REQUIRE(params.size() == 8);
  const DecoderParams back = DecoderParams::from_params(params);
  for (int i = 0; i < 4; ++i) {
    REQUIRE(back.kernels[i].data == dec.kernels[i].data);
    REQUIRE(back.biases[i].data == dec.biases[i].data);
  }
}

TEST_CASE("rebuilding decoder parameters validates names and shapes") {
  Rng rng(109);
  const DecoderParams dec = DecoderParams::init(rng);
  ParamMap params = dec.to_params();
  ParamMap missing = params;
  missing.erase(missing.begin()->first);
  CHECK_THROWS_AS(DecoderParams::from_params(missing), FormatError);

  ParamMap wrong = params;
  wrong["decoder/conv1/bias"] = Matrix(1, 7);
  CHECK_THROWS_AS(DecoderParams::from_params(wrong), FormatError);
}

TEST_CASE("the taped encoder registers nothing trainable") {
  const Encoder enc = Encoder::make();
  Rng rng(110);
  Tensor4 img(1, 3, 8, 8);
  fill_uniform(img, rng, 0.0, 1.0);

  GradTape tape;
  const std::vector<NodeRef> taps = enc.forward_taped(tape, tape.constant(img));
  CHECK(tape.param_count() == 0);
  REQUIRE(taps.size() == 4);

  const EncoderFeatures plain = enc.forward(img);
  for (int i = 0; i < 4; ++i) require_close(tape.value4(taps[i]), plain.taps[i], 1e-12);
}
