#pragma once

#include <filesystem>
#include <optional>

#include "gssdf/dataset.hpp"
#include "gssdf/rng.hpp"
#include "gssdf/synth_scene.hpp"

namespace gssdf {

/// Standard sphere tracing: surface tolerance 1e-6, at most 512 steps.
/// Returns the hit distance, or nullopt on a miss / range exhaustion.
std::optional<double> sphere_trace(const AnalyticScene& scene, const Vec3& origin,
                                   const Vec3& dir, double max_range);

struct GenerateConfig {
  int width = 160, height = 120;
  double focal = 120.0;
  int n_views = 72;
  int n_scans = 40;
  int rays_per_scan = 5000;
  double lidar_noise_sigma = 0.0;  // Gaussian range noise
  double max_range = 60.0;
  bool write_gt = true;
  double gt_mesh_cell = 0.0;  // 0 = extent/192
  uint64_t seed = 1;
};

/// Reference ray-cast render of the analytic scene (Lambertian shading).
struct ReferenceRender {
  Image color, depth, normal;
};
ReferenceRender reference_render(const AnalyticScene& scene, const CameraFrame& cam,
                                 double max_range);

/// Per-scene camera trajectory (orbit for "sphere", interior ring for
/// "box_room", forward pass for "street").
std::vector<CameraFrame> make_trajectory(const AnalyticScene& scene, const GenerateConfig& cfg);

/// Writes the full dataset (images, poses, lidar, optional ground truth) in
/// the canonical layout. Throws if any camera pose starts inside geometry.
void generate_dataset(const AnalyticScene& scene, const GenerateConfig& cfg,
                      const std::filesystem::path& out_dir);

}  // namespace gssdf
