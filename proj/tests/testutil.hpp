#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gssdf/common.hpp"
#include "gssdf/sdf_field.hpp"

namespace gssdf::testutil {

/// Central finite difference of eval() w.r.t. *slot.
inline double fd_slot(const std::function<double()>& eval, double* slot, double h) {
  const double saved = *slot;
  *slot = saved + h;
  const double fp = eval();
  *slot = saved - h;
  const double fm = eval();
  *slot = saved;
  return (fp - fm) / (2.0 * h);
}

inline bool close_rel(double a, double b, double rtol, double atol = 1e-9) {
  return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

/// Small field configuration for gradient-check tests.
inline SdfFieldConfig tiny_field_config(const Aabb& bounds, int hidden = 16, int layers = 2) {
  SdfFieldConfig cfg;
  cfg.grid.levels = 16;
  cfg.grid.features_per_level = 2;
  cfg.grid.table_size_log2 = 8;
  cfg.grid.base_resolution = 4;
  cfg.grid.growth_factor = 1.3;
  cfg.grid.bounds = bounds;
  cfg.hidden_width = hidden;
  cfg.hidden_layers = layers;
  return cfg;
}

/// True when x sits at least `factor*h` away from every interpolation-cell
/// face of every level. Central differences of the spatial gradient are only
/// valid there (trilinear interpolation has slope kinks on cell faces).
inline bool clear_of_grid_planes(const HashGridConfig& grid, const Vec3& x, double h,
                                 double factor = 5.0) {
  const Vec3 ext = grid.bounds.extent();
  for (int l = 0; l < grid.levels; ++l) {
    const int res = grid.resolution(l);
    for (int a = 0; a < 3; ++a) {
      const double pos = (x[a] - grid.bounds.min[a]) / ext[a] * res;
      const double frac = pos - std::floor(pos);
      const double margin = factor * h / ext[a] * res;
      if (frac < margin || frac > 1.0 - margin) return false;
    }
  }
  return true;
}

/// Builds a field whose distance output is exactly n.x + offset inside
/// `bounds` (level-0 table holds the linear data, the MLP forwards channel 0
/// through an always-positive ReLU corridor).
inline SdfField make_linear_field(const Vec3& n, double offset, const Aabb& bounds) {
  SdfFieldConfig cfg;
  cfg.grid.levels = 16;
  cfg.grid.features_per_level = 2;
  cfg.grid.table_size_log2 = 13;  // keeps level 0 (17^3 = 4913) dense
  cfg.grid.base_resolution = 16;
  cfg.grid.growth_factor = 1.26;
  cfg.grid.bounds = bounds;
  cfg.hidden_width = 16;
  cfg.hidden_layers = 2;
  SdfField field(cfg, 0);

  auto params = field.params();
  for (ParamTensor* p : params) p->fill(0.0);

  // Level-0 dense grid: feature 0 stores the linear function at grid corners.
  ParamTensor& tables = field.grid_tables();
  const int res = cfg.grid.resolution(0);
  const int side = res + 1;
  const Vec3 bmin = bounds.min;
  const Vec3 ext = bounds.extent();
  for (int iz = 0; iz < side; ++iz)
    for (int iy = 0; iy < side; ++iy)
      for (int ix = 0; ix < side; ++ix) {
        const Vec3 pos = bmin + Vec3(double(ix) / res * ext.x(), double(iy) / res * ext.y(),
                                     double(iz) / res * ext.z());
        const int64_t entry = ix + int64_t(side) * (iy + int64_t(side) * iz);
        tables[(field.table_offset(0) + entry) * cfg.grid.features_per_level] =
            n.dot(pos) + offset;
      }

  // MLP: channel 0 shifted into the positive ReLU region and shifted back at
  // the head, so the composite is exactly linear on the domain.
  const double big = 10.0 * (1.0 + ext.norm() * n.norm() + std::abs(offset));
  ParamTensor& w0 = *params[1];
  ParamTensor& b0 = *params[2];
  ParamTensor& w1 = *params[3];
  ParamTensor& b1 = *params[4];
  ParamTensor& w_head = *params[5];
  ParamTensor& b_head = *params[6];
  w0[0 * cfg.grid.feature_width() + 0] = 1.0;  // pick feature 0
  b0[0] = big;
  w1[0 * cfg.hidden_width + 0] = 1.0;
  w_head[0 * cfg.hidden_width + 0] = 1.0;
  b_head[0] = -big;
  b_head[1] = 0.0;  // scale head: beta = softplus(0) + beta_min
  return field;
}

}  // namespace gssdf::testutil
