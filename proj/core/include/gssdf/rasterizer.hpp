#pragma once

#include <vector>

#include "gssdf/camera.hpp"
#include "gssdf/splat_scene.hpp"
#include "gssdf/tape.hpp"

namespace gssdf {

struct RenderConfig {
  double kernel_min = 1.0 / 255.0;   // contributions below this respond as a miss
  double transmittance_min = 1e-4;   // front-to-back early termination
  double near_clip = 1e-3;
  int tile = 16;
  bool brute_force = false;  // reference path: every splat tested at every pixel
};

struct RenderOutput {
  Image color;   // rgb
  Image depth;   // camera-z, alpha-weighted mean; 0 where alpha = 0
  Image normal;  // world frame, camera-facing
  Image alpha;   // accumulated opacity in [0,1]
  std::vector<double> splat_weights;  // per-splat blend weight summed over pixels
};

/// Exact ray/disk-plane intersection in disk coordinates. Returns false when
/// the ray is (near) parallel to the plane or the hit is behind the origin.
bool intersect_disk(const Vec3& ray_o, const Vec3& ray_d, const Vec3& p, const Vec3& t_u,
                    const Vec3& t_v, const Vec3& n, double s_u, double s_v, double& u, double& v,
                    double& t_star);

/// Forward rendering (no gradients recorded).
RenderOutput render(const SplatScene& scene, const CameraFrame& cam,
                    const RenderConfig& cfg = {});

/// Differentiable rendering as a single tape op. Backward consumes the
/// adjoints of the four image nodes and accumulates gradients on all splat
/// attribute tensors; it also fills the scene's densification statistics.
/// splat_weights are exposed as detached values.
struct RenderNodes {
  ValueId color = -1, depth = -1, normal = -1, alpha = -1;
  std::vector<double> splat_weights;
  int width = 0, height = 0;
};
RenderNodes render_op(Tape& tape, SplatScene& scene, const CameraFrame& cam,
                      const RenderConfig& cfg = {});

/// Photometric loss 0.8 * L1 + 0.2 * DSSIM, DSSIM = (1 - SSIM) / 2.
double loss_color(const Image& rendered, const Image& gt);
ValueId color_loss_op(Tape& tape, const RenderNodes& nodes, const Image& gt);

}  // namespace gssdf
