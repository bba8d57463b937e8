#include "gssdf/ssim.hpp"

#include <cmath>

namespace gssdf {

namespace {

constexpr int kWin = 11;
constexpr int kRad = kWin / 2;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const double* window() {
  static double w[kWin * kWin];
  static bool init = [] {
    double g[kWin];
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
      const double d = i - kRad;
      g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += g[i];
    }
    for (int i = 0; i < kWin; ++i) g[i] /= sum;
    for (int y = 0; y < kWin; ++y)
      for (int x = 0; x < kWin; ++x) w[y * kWin + x] = g[y] * g[x];
    return true;
  }();
  (void)init;
  return w;
}

struct WindowStats {
  double mu_x, mu_y, gxx, gyy, gxy;
};

// Stats of the window centered at (cx, cy), channel c. Caller guarantees the
// window is fully inside.
WindowStats window_stats(const Image& a, const Image& b, int cx, int cy, int c) {
  const double* w = window();
  WindowStats s{0, 0, 0, 0, 0};
  for (int dy = -kRad; dy <= kRad; ++dy)
    for (int dx = -kRad; dx <= kRad; ++dx) {
      const double wk = w[(dy + kRad) * kWin + (dx + kRad)];
      const double xv = a.at(cx + dx, cy + dy, c);
      const double yv = b.at(cx + dx, cy + dy, c);
      s.mu_x += wk * xv;
      s.mu_y += wk * yv;
      s.gxx += wk * xv * xv;
      s.gyy += wk * yv * yv;
      s.gxy += wk * xv * yv;
    }
  return s;
}

double ssim_from_stats(const WindowStats& s) {
  const double var_x = s.gxx - s.mu_x * s.mu_x;
  const double var_y = s.gyy - s.mu_y * s.mu_y;
  const double cov = s.gxy - s.mu_x * s.mu_y;
  const double a1 = 2.0 * s.mu_x * s.mu_y + kC1;
  const double a2 = 2.0 * cov + kC2;
  const double b1 = s.mu_x * s.mu_x + s.mu_y * s.mu_y + kC1;
  const double b2 = var_x + var_y + kC2;
  return (a1 * a2) / (b1 * b2);
}

}  // namespace

double ssim_mean(const Image& a, const Image& b) {
  require(a.width == b.width && a.height == b.height && a.channels == b.channels,
          "ssim: dimension mismatch");
  require(a.width >= kWin && a.height >= kWin, "ssim: image smaller than the window");
  double sum = 0.0;
  int64_t count = 0;
  for (int c = 0; c < a.channels; ++c)
    for (int cy = kRad; cy < a.height - kRad; ++cy)
      for (int cx = kRad; cx < a.width - kRad; ++cx) {
        sum += ssim_from_stats(window_stats(a, b, cx, cy, c));
        ++count;
      }
  return sum / static_cast<double>(count);
}

void ssim_backward(const Image& a, const Image& b, double adj, Image& a_grad) {
  require(a_grad.width == a.width && a_grad.height == a.height && a_grad.channels == a.channels,
          "ssim_backward: gradient shape mismatch");
  const double* w = window();
  const int64_t count =
      static_cast<int64_t>(a.channels) * (a.height - 2 * kRad) * (a.width - 2 * kRad);
  const double scale = adj / static_cast<double>(count);

  for (int c = 0; c < a.channels; ++c) {
    for (int cy = kRad; cy < a.height - kRad; ++cy) {
      for (int cx = kRad; cx < a.width - kRad; ++cx) {
        const WindowStats s = window_stats(a, b, cx, cy, c);
        const double cov = s.gxy - s.mu_x * s.mu_y;
        const double var_x = s.gxx - s.mu_x * s.mu_x;
        const double var_y = s.gyy - s.mu_y * s.mu_y;
        const double a1 = 2.0 * s.mu_x * s.mu_y + kC1;
        const double a2 = 2.0 * cov + kC2;
        const double b1 = s.mu_x * s.mu_x + s.mu_y * s.mu_y + kC1;
        const double b2 = var_x + var_y + kC2;
        const double S = (a1 * a2) / (b1 * b2);

        const double g_a1 = a2 / (b1 * b2);
        const double g_a2 = a1 / (b1 * b2);
        const double g_b1 = -S / b1;
        const double g_b2 = -S / b2;

        // window-level sensitivities
        const double d_mu = g_a1 * 2.0 * s.mu_y + g_b1 * 2.0 * s.mu_x +
                            g_a2 * 2.0 * (-s.mu_y) + g_b2 * (-2.0 * s.mu_x);
        const double d_gxx = g_b2;        // through var_x
        const double d_gxy = g_a2 * 2.0;  // through cov

        for (int dy = -kRad; dy <= kRad; ++dy)
          for (int dx = -kRad; dx <= kRad; ++dx) {
            const double wk = w[(dy + kRad) * kWin + (dx + kRad)];
            const int px = cx + dx, py = cy + dy;
            const double xv = a.at(px, py, c);
            const double yv = b.at(px, py, c);
            a_grad.at(px, py, c) += scale * wk * (d_mu + 2.0 * xv * d_gxx + yv * d_gxy);
          }
      }
    }
  }
}

}  // namespace gssdf
