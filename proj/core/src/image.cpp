#include "gssdf/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace gssdf {

Image Image::to_gray() const {
  if (channels == 1) return *this;
  Image g(width, height, 1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double s = 0.0;
      for (int c = 0; c < channels; ++c) s += at(x, y, c);
      g.at(x, y) = s / channels;
    }
  return g;
}

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

uint8_t to_u8(double v) {
  const double c = std::min(1.0, std::max(0.0, v));
  return static_cast<uint8_t>(std::lround(c * 255.0));
}

uint16_t to_u16(double v) {
  const double c = std::min(1.0, std::max(0.0, v));
  return static_cast<uint16_t>(std::lround(c * 65535.0));
}

void write_png(const std::string& path, int width, int height, int bit_depth, int color_type,
               const std::vector<uint8_t>& bytes) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  require(fp != nullptr, "PNG write: cannot open " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  require(png && info, "PNG write: init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("PNG write: libpng error on " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const size_t stride = bytes.size() / static_cast<size_t>(height);
  std::vector<png_bytep> rows(static_cast<size_t>(height));
  for (int y = 0; y < height; ++y)
    rows[static_cast<size_t>(y)] = const_cast<png_bytep>(bytes.data() + static_cast<size_t>(y) * stride);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void read_png(const std::string& path, int& width, int& height, int& bit_depth, int& channels,
              std::vector<uint8_t>& bytes) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  require(fp != nullptr, "PNG read: cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  require(png && info, "PNG read: init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("PNG read: libpng error on " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  channels = png_get_channels(png, info);
  const size_t stride = png_get_rowbytes(png, info);
  bytes.resize(stride * static_cast<size_t>(height));
  std::vector<png_bytep> rows(static_cast<size_t>(height));
  for (int y = 0; y < height; ++y) rows[static_cast<size_t>(y)] = bytes.data() + static_cast<size_t>(y) * stride;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
}

}  // namespace

void write_png_rgb8(const std::string& path, const Image& img) {
  require(img.channels == 3, "write_png_rgb8: need 3 channels");
  std::vector<uint8_t> bytes(static_cast<size_t>(img.width) * img.height * 3);
  size_t k = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) bytes[k++] = to_u8(img.at(x, y, c));
  write_png(path, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, bytes);
}

Image read_png_rgb8(const std::string& path) {
  int w, h, depth, ch;
  std::vector<uint8_t> bytes;
  read_png(path, w, h, depth, ch, bytes);
  require(depth == 8, "read_png_rgb8: expected 8-bit PNG at " + path);
  require(ch >= 3, "read_png_rgb8: expected RGB PNG at " + path);
  Image img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) =
            bytes[(static_cast<size_t>(y) * w + x) * static_cast<size_t>(ch) + static_cast<size_t>(c)] / 255.0;
  return img;
}

void write_png_gray16(const std::string& path, const Image& img, double scale) {
  require(img.channels == 1, "write_png_gray16: need 1 channel");
  require(scale > 0, "write_png_gray16: scale must be positive");
  std::vector<uint8_t> bytes(static_cast<size_t>(img.width) * img.height * 2);
  size_t k = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const uint16_t v = to_u16(img.at(x, y) / scale);
      bytes[k++] = static_cast<uint8_t>(v >> 8);  // PNG is big-endian
      bytes[k++] = static_cast<uint8_t>(v & 0xff);
    }
  write_png(path, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY, bytes);
}

Image read_png_gray16(const std::string& path, double scale) {
  int w, h, depth, ch;
  std::vector<uint8_t> bytes;
  read_png(path, w, h, depth, ch, bytes);
  require(depth == 16 && ch == 1, "read_png_gray16: expected 16-bit grayscale at " + path);
  Image img(w, h, 1);
  size_t k = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const uint16_t v = static_cast<uint16_t>((bytes[k] << 8) | bytes[k + 1]);
      k += 2;
      img.at(x, y) = v / 65535.0 * scale;
    }
  return img;
}

void write_png_normal(const std::string& path, const Image& img) {
  require(img.channels == 3, "write_png_normal: need 3 channels");
  Image mapped(img.width, img.height, 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) mapped.at(x, y, c) = 0.5 * (img.at(x, y, c) + 1.0);
  write_png_rgb8(path, mapped);
}

double image_l1(const Image& a, const Image& b) {
  require(a.width == b.width && a.height == b.height && a.channels == b.channels,
          "image_l1: dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
  return s / static_cast<double>(a.data.size());
}

double image_mse(const Image& a, const Image& b) {
  require(a.width == b.width && a.height == b.height && a.channels == b.channels,
          "image_mse: dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) s += sqr(a.data[i] - b.data[i]);
  return s / static_cast<double>(a.data.size());
}

}  // namespace gssdf
