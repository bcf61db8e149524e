#pragma once

#include <string>
#include <vector>

#include "grin/tensor.hpp"

namespace grin {

// 8-bit RGB raster, rows top to bottom, 3 bytes per pixel.
struct Image8 {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> rgb;

  std::size_t index(int y, int x, int ch) const {
    return (static_cast<std::size_t>(y) * width + x) * 3 + ch;
  }
};

// Decodes any PNG (palette, grayscale, 16-bit, alpha) to 8-bit RGB.
// IoError if the file cannot be opened, FormatError if it is not a PNG.
Image8 read_png(const std::string& path);

// Writes 8-bit RGB. IoError on failure.
void write_png(const Image8& img, const std::string& path);

// Byte b maps to b / 255 in a 1 x 3 x H x W tensor.
Tensor4 image_to_tensor(const Image8& img);

// Values are clamped to [0,1], then rounded half-up to a byte. Input must be
// a single 3-channel instance.
Image8 tensor_to_image(const Tensor4& t);

// Nearest-neighbor resample to the exact target size.
Image8 resize_nearest(const Image8& img, int width, int height);

// Largest positive multiple of `multiple` not above v, but never below
// `multiple` itself; used to snap image sizes for the encoder.
int snap_down(int v, int multiple);

}  // namespace grin
