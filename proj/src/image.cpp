#include "grin/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <string>

#include "grin/errors.hpp"

namespace grin {

namespace {

// libpng reports errors by longjmp, so everything inside the setjmp region
// stays free of C++ objects that would need unwinding.
struct PngReader {
  FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;

  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWriter {
  FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;

  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

void check_rgb(const Image8& img, const char* what) {
  if (img.width < 1 || img.height < 1) {
    throw ShapeError(std::string(what) + ": image must be at least 1x1");
  }
  const std::size_t expected = static_cast<std::size_t>(img.width) * img.height * 3;
  if (img.rgb.size() != expected) {
    throw ShapeError(std::string(what) + ": pixel buffer holds " +
                     std::to_string(img.rgb.size()) + " bytes, expected " +
                     std::to_string(expected));
  }
}

}  // namespace

Image8 read_png(const std::string& path) {
  PngReader r;
  r.fp = std::fopen(path.c_str(), "rb");
  if (!r.fp) throw IoError("read_png: cannot open '" + path + "'");

  unsigned char header[8];
  if (std::fread(header, 1, 8, r.fp) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw FormatError("read_png: '" + path + "' is not a PNG file");
  }
  std::rewind(r.fp);

  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) throw IoError("read_png: out of memory");
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw IoError("read_png: out of memory");
  if (setjmp(png_jmpbuf(r.png))) {
    throw FormatError("read_png: '" + path + "' failed to decode");
  }

  png_init_io(r.png, r.fp);
  png_read_png(r.png, r.info,
               PNG_TRANSFORM_STRIP_16 | PNG_TRANSFORM_PACKING | PNG_TRANSFORM_EXPAND |
                   PNG_TRANSFORM_GRAY_TO_RGB | PNG_TRANSFORM_STRIP_ALPHA,
               nullptr);

  const png_uint_32 width = png_get_image_width(r.png, r.info);
  const png_uint_32 height = png_get_image_height(r.png, r.info);
  if (png_get_channels(r.png, r.info) != 3 || png_get_bit_depth(r.png, r.info) != 8) {
    throw FormatError("read_png: '" + path + "' did not decode to 8-bit RGB");
  }

  Image8 img;
  img.width = static_cast<int>(width);
  img.height = static_cast<int>(height);
  img.rgb.resize(static_cast<std::size_t>(width) * height * 3);
  png_bytepp rows = png_get_rows(r.png, r.info);
  for (png_uint_32 y = 0; y < height; ++y) {
    std::copy(rows[y], rows[y] + static_cast<std::size_t>(width) * 3,
              img.rgb.begin() + static_cast<std::size_t>(y) * width * 3);
  }
  return img;
}

void write_png(const Image8& img, const std::string& path) {
  check_rgb(img, "write_png");
  PngWriter w;
  w.fp = std::fopen(path.c_str(), "wb");
  if (!w.fp) throw IoError("write_png: cannot open '" + path + "' for writing");

  w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!w.png) throw IoError("write_png: out of memory");
  w.info = png_create_info_struct(w.png);
  if (!w.info) throw IoError("write_png: out of memory");
  if (setjmp(png_jmpbuf(w.png))) {
    throw IoError("write_png: encoding '" + path + "' failed");
  }

  png_init_io(w.png, w.fp);
  png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(w.png, const_cast<png_bytep>(img.rgb.data() + img.index(y, 0, 0)));
  }
  png_write_end(w.png, nullptr);
}

Tensor4 image_to_tensor(const Image8& img) {
  check_rgb(img, "image_to_tensor");
  Tensor4 t(1, 3, img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        t.at(0, ch, y, x) = img.rgb[img.index(y, x, ch)] / 255.0;
      }
    }
  }
  return t;
}

Image8 tensor_to_image(const Tensor4& t) {
  if (t.n != 1 || t.c != 3 || t.h < 1 || t.w < 1) {
    throw ShapeError("tensor_to_image: expected 1 x 3 x H x W, got " + std::to_string(t.n) +
                     " x " + std::to_string(t.c) + " x " + std::to_string(t.h) + " x " +
                     std::to_string(t.w));
  }
  Image8 img;
  img.width = t.w;
  img.height = t.h;
  img.rgb.resize(static_cast<std::size_t>(t.w) * t.h * 3);
  for (int y = 0; y < t.h; ++y) {
    for (int x = 0; x < t.w; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        const double v = std::min(1.0, std::max(0.0, t.at(0, ch, y, x)));
        img.rgb[img.index(y, x, ch)] = static_cast<unsigned char>(std::floor(v * 255.0 + 0.5));
      }
    }
  }
  return img;
}

Image8 resize_nearest(const Image8& img, int width, int height) {
  check_rgb(img, "resize_nearest");
  if (width < 1 || height < 1) {
    throw ShapeError("resize_nearest: target must be at least 1x1, got " +
                     std::to_string(width) + "x" + std::to_string(height));
  }
  Image8 out;
  out.width = width;
  out.height = height;
  out.rgb.resize(static_cast<std::size_t>(width) * height * 3);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(img.height - 1,
                            static_cast<int>((static_cast<long long>(y) * img.height) / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(img.width - 1,
                              static_cast<int>((static_cast<long long>(x) * img.width) / width));
      for (int ch = 0; ch < 3; ++ch) {
        out.rgb[out.index(y, x, ch)] = img.rgb[img.index(sy, sx, ch)];
      }
    }
  }
  return out;
}

int snap_down(int v, int multiple) {
  const int snapped = (v / multiple) * multiple;
  return std::max(multiple, snapped);
}

}  // namespace grin
