#pragma once

#include <string>
#include <vector>

#include "gssdf/common.hpp"

namespace gssdf {

/// Dense row-major image, `channels` interleaved doubles per pixel.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c) : width(w), height(h), channels(c) {
    data.assign(static_cast<size_t>(w) * h * c, 0.0);
  }

  bool empty() const { return data.empty(); }
  int64_t pixel_count() const { return static_cast<int64_t>(width) * height; }

  double& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }

  Vec3 rgb(int x, int y) const { return Vec3(at(x, y, 0), at(x, y, 1), at(x, y, 2)); }

  /// Mean over channels (identity for single-channel images).
  Image to_gray() const;
};

/// 8-bit RGB PNG; values clamped to [0,1].
void write_png_rgb8(const std::string& path, const Image& img);
Image read_png_rgb8(const std::string& path);

/// 16-bit grayscale PNG storing value/scale in [0,1].
void write_png_gray16(const std::string& path, const Image& img, double scale);
Image read_png_gray16(const std::string& path, double scale);

/// 8-bit RGB PNG of a vector field, mapping [-1,1] to [0,255].
void write_png_normal(const std::string& path, const Image& img);

double image_l1(const Image& a, const Image& b);
double image_mse(const Image& a, const Image& b);

}  // namespace gssdf
