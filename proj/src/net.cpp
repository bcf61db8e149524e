#include "grin/net.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <variant>

#include "grin/errors.hpp"

namespace grin {

Tensor4 conv2d(const Tensor4& x, const Tensor4& kernel, const Matrix& bias) {
  const int k = kernel.h;
  if (kernel.c != x.c || kernel.w != k || k % 2 == 0 || k <= 0) {
    std::ostringstream os;
    os << "conv2d: kernel (" << kernel.n << "," << kernel.c << "," << kernel.h << "," << kernel.w
       << ") does not fit input with " << x.c << " channels";
    throw ShapeError(os.str());
  }
  if (bias.rows != 1 || bias.cols != kernel.n) {
    throw ShapeError("conv2d: bias must be a 1 x out_channels matrix");
  }
  const int pad = k / 2;
  const int ih = x.h, iw = x.w;
  const std::size_t plane = static_cast<std::size_t>(ih) * iw;

  Tensor4 out(x.n, kernel.n, ih, iw);
  for (int n = 0; n < x.n; ++n) {
    for (int co = 0; co < kernel.n; ++co) {
      double* dst = &out.data[out.index(n, co, 0, 0)];
      std::fill(dst, dst + plane, bias.at(0, co));
      for (int ci = 0; ci < x.c; ++ci) {
        const double* src = &x.data[x.index(n, ci, 0, 0)];
        for (int ky = 0; ky < k; ++ky) {
          const int y0 = std::max(0, pad - ky), y1 = std::min(ih, ih + pad - ky);
          for (int kx = 0; kx < k; ++kx) {
            const double coef = kernel.at(co, ci, ky, kx);
            if (coef == 0.0) continue;
            const int x0 = std::max(0, pad - kx), x1 = std::min(iw, iw + pad - kx);
            for (int y = y0; y < y1; ++y) {
              const double* s = src + static_cast<std::size_t>(y + ky - pad) * iw + (x0 + kx - pad);
              double* d = dst + static_cast<std::size_t>(y) * iw + x0;
              for (int i = 0; i < x1 - x0; ++i) d[i] += coef * s[i];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor4 relu(const Tensor4& x) {
  Tensor4 out = x;
  for (double& v : out.data) v = std::max(v, 0.0);
  return out;
}

Tensor4 avg_pool2(const Tensor4& x) {
  if (x.h % 2 != 0 || x.w % 2 != 0) {
    throw ShapeError("avg_pool2: spatial size must be even");
  }
  Tensor4 out(x.n, x.c, x.h / 2, x.w / 2);
  const std::size_t planes = static_cast<std::size_t>(x.n) * x.c;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = &x.data[p * x.h * x.w];
    double* dst = &out.data[p * out.h * out.w];
    for (int y = 0; y < out.h; ++y) {
      for (int xo = 0; xo < out.w; ++xo) {
        const double* s = src + static_cast<std::size_t>(2 * y) * x.w + 2 * xo;
        dst[static_cast<std::size_t>(y) * out.w + xo] = 0.25 * (s[0] + s[1] + s[x.w] + s[x.w + 1]);
      }
    }
  }
  return out;
}

Tensor4 upsample2(const Tensor4& x) {
  Tensor4 out(x.n, x.c, x.h * 2, x.w * 2);
  const std::size_t planes = static_cast<std::size_t>(x.n) * x.c;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = &x.data[p * x.h * x.w];
    double* dst = &out.data[p * out.h * out.w];
    for (int y = 0; y < out.h; ++y) {
      const double* srow = src + static_cast<std::size_t>(y / 2) * x.w;
      double* drow = dst + static_cast<std::size_t>(y) * out.w;
      for (int xo = 0; xo < out.w; ++xo) drow[xo] = srow[xo / 2];
    }
  }
  return out;
}

namespace {

constexpr int kEncoderChannels[] = {3, 8, 16, 32, 64};
constexpr int kDecoderChannels[] = {64, 32, 16, 8, 3};
constexpr int kKernel = 3;

void check_encoder_input(const Tensor4& img) {
  if (img.n < 1 || img.c != 3 || img.h % 8 != 0 || img.w % 8 != 0 || img.h < 8 || img.w < 8) {
    std::ostringstream os;
    os << "encoder: input must be N x 3 with spatial size divisible by 8, got (" << img.n << ","
       << img.c << "," << img.h << "," << img.w << ")";
    throw ShapeError(os.str());
  }
}

std::string layer_name(int layer, const char* leaf) {
  std::ostringstream os;
  os << "decoder/conv" << layer + 1 << "/" << leaf;
  return os.str();
}

}  // namespace

Encoder Encoder::make(std::uint64_t seed) {
  Encoder enc;
  enc.seed = seed;
  Rng rng(seed);
  for (int i = 0; i < 4; ++i) {
    const int cin = kEncoderChannels[i];
    const int cout = kEncoderChannels[i + 1];
    Tensor4 kernel(cout, cin, kKernel, kKernel);
    fill_normal(kernel, rng, std::sqrt(2.0 / (cin * kKernel * kKernel)));
    Matrix bias(1, cout);
    fill_normal(bias, rng, 0.1);
    enc.kernels.push_back(std::move(kernel));
    enc.biases.push_back(std::move(bias));
  }
  return enc;
}

EncoderFeatures Encoder::forward(const Tensor4& img) const {
  check_encoder_input(img);
  EncoderFeatures feats;
  Tensor4 cur = img;
  for (int i = 0; i < 4; ++i) {
    if (i > 0) cur = avg_pool2(cur);
    cur = relu(conv2d(cur, kernels[i], biases[i]));
    feats.taps.push_back(cur);
  }
  return feats;
}

std::vector<NodeRef> Encoder::forward_taped(GradTape& tape, NodeRef img) const {
  std::vector<NodeRef> taps;
  NodeRef cur = img;
  for (int i = 0; i < 4; ++i) {
    if (i > 0) cur = tape.avg_pool2(cur);
    cur = tape.relu(tape.conv2d(cur, tape.constant(kernels[i]), tape.constant(biases[i])));
    taps.push_back(cur);
  }
  return taps;
}

DecoderParams DecoderParams::init(Rng& rng) {
  DecoderParams p;
  for (int i = 0; i < 4; ++i) {
    const int cin = kDecoderChannels[i];
    const int cout = kDecoderChannels[i + 1];
    Tensor4 kernel(cout, cin, kKernel, kKernel);
    fill_normal(kernel, rng, std::sqrt(2.0 / (cin * kKernel * kKernel)));
    p.kernels.push_back(std::move(kernel));
    p.biases.emplace_back(1, cout);  // biases start at zero
  }
  return p;
}

ParamMap DecoderParams::to_params() const {
  ParamMap out;
  for (int i = 0; i < 4; ++i) {
    out[layer_name(i, "kernel")] = kernels[i];
    out[layer_name(i, "bias")] = biases[i];
  }
  return out;
}

DecoderParams DecoderParams::from_params(const ParamMap& params) {
  DecoderParams p;
  for (int i = 0; i < 4; ++i) {
    const int cin = kDecoderChannels[i];
    const int cout = kDecoderChannels[i + 1];

    const std::string kname = layer_name(i, "kernel");
    auto kit = params.find(kname);
    if (kit == params.end() || !std::holds_alternative<Tensor4>(kit->second)) {
      throw FormatError("decoder parameters: missing kernel entry '" + kname + "'");
    }
    const Tensor4& kernel = std::get<Tensor4>(kit->second);
    if (kernel.n != cout || kernel.c != cin || kernel.h != kKernel || kernel.w != kKernel) {
      std::ostringstream os;
      os << "decoder parameters: '" << kname << "' has shape (" << kernel.n << "," << kernel.c
         << "," << kernel.h << "," << kernel.w << "), expected (" << cout << "," << cin << ","
         << kKernel << "," << kKernel << ")";
      throw FormatError(os.str());
    }

    const std::string bname = layer_name(i, "bias");
    auto bit = params.find(bname);
    if (bit == params.end() || !std::holds_alternative<Matrix>(bit->second)) {
      throw FormatError("decoder parameters: missing bias entry '" + bname + "'");
    }
    const Matrix& bias = std::get<Matrix>(bit->second);
    if (bias.rows != 1 || bias.cols != cout) {
      std::ostringstream os;
      os << "decoder parameters: '" << bname << "' has shape " << bias.rows << "x" << bias.cols
         << ", expected 1x" << cout;
      throw FormatError(os.str());
    }

    p.kernels.push_back(kernel);
    p.biases.push_back(bias);
  }
  return p;
}

DecoderRefs register_decoder(GradTape& tape, const DecoderParams& params) {
  DecoderRefs refs;
  for (int i = 0; i < 4; ++i) {
    refs.kernels.push_back(tape.param(layer_name(i, "kernel"), params.kernels[i]));
    refs.biases.push_back(tape.param(layer_name(i, "bias"), params.biases[i]));
  }
  return refs;
}

Tensor4 decoder_forward(const Tensor4& t, const DecoderParams& params) {
  Tensor4 cur = t;
  for (int i = 0; i < 3; ++i) {
    cur = upsample2(relu(conv2d(cur, params.kernels[i], params.biases[i])));
  }
  return conv2d(cur, params.kernels[3], params.biases[3]);
}

NodeRef decoder_forward_taped(GradTape& tape, NodeRef t, const DecoderRefs& refs) {
  NodeRef cur = t;
  for (int i = 0; i < 3; ++i) {
    cur = tape.upsample2(tape.relu(tape.conv2d(cur, refs.kernels[i], refs.biases[i])));
  }
  return tape.conv2d(cur, refs.kernels[3], refs.biases[3]);
}

}  // namespace grin
