#pragma once

#include <vector>

#include "gssdf/lidar.hpp"
#include "gssdf/rng.hpp"
#include "gssdf/sdf_field.hpp"
#include "gssdf/tape.hpp"

namespace gssdf {

struct RaySamplingConfig {
  int n_rays = 4096;
  int surface_samples = 4;
  int free_samples = 4;
  double truncation = 0.1;  // surface band half-width (world units)
  double free_min = 0.05;   // free-space lower cutoff along the ray
};

/// Point samples along measured rays with soft occupancy targets. Targets are
/// sigmoid((t_i - t) / beta) with beta the field's current predicted scale at
/// the sample, treated as a constant.
struct RaySampleBatch {
  std::vector<double> points;    // [n][3]
  std::vector<double> labels;    // [n], in (0,1)
  std::vector<double> t_sample;  // [n], offset along the owning ray
  std::vector<int32_t> ray_of;   // [n] -> ray index
  std::vector<Vec3> ray_origin;  // per ray
  std::vector<Vec3> ray_dir;     // per ray, unit
  std::vector<double> ray_dist;  // per ray, measured t

  int64_t count() const { return static_cast<int64_t>(labels.size()); }
};

RaySampleBatch sample_rays(const FlatRays& rays, const SdfField& field,
                           const RaySamplingConfig& cfg, Rng& rng);
RaySampleBatch sample_rays(const LidarScan& scan, const SdfField& field,
                           const RaySamplingConfig& cfg, Rng& rng);

/// Binary cross-entropy between predicted occupancy sigmoid(-s/beta) and the
/// batch labels, summed over samples. Predictions are clamped to
/// [1e-7, 1-1e-7] before the logs. Differentiable into sdf and beta values.
ValueId occupancy_bce_op(Tape& tape, const FieldQueryNodes& q, std::vector<double> labels);

/// Unit-gradient-norm penalty sum_i (|grad_i| - 1)^2 over the queried points.
/// A vanishing gradient (norm < 1e-8) contributes (0-1)^2 with a fixed-axis
/// subgradient pushing the norm up.
ValueId eikonal_op(Tape& tape, const FieldQueryNodes& q);

/// Convenience forward evaluations (no gradients).
double loss_bce(SdfField& field, const RaySampleBatch& batch);
double loss_eikonal(SdfField& field, const std::vector<double>& points);

}  // namespace gssdf
