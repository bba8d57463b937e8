#pragma once

#include <vector>

#include "gssdf/marching_cubes.hpp"
#include "gssdf/mesh.hpp"
#include "gssdf/sdf_field.hpp"
#include "gssdf/splat_scene.hpp"

namespace gssdf {

struct GeometryInitConfig {
  double cell_size = 0.02;        // marching-cubes cell for initialization
  int64_t max_init_splats = 0;    // 0 = unlimited; coarsen the cell until met
  double hessian_step_factor = 0.1;  // finite-difference step = factor * cell
  int sh_degree = 2;
};

struct GeometryInitResult {
  std::vector<SplatDisk> splats;
  TriangleMesh mesh;          // the mesh that produced the splats
  double cell_size_used = 0;  // after any coarsening
  int64_t degenerate_frames = 0;  // gradient/curvature fallbacks taken
};

/// One splat per isosurface mesh vertex: center = vertex, normal from the
/// field gradient, second axis from a curvature probe (Hessian-normal product
/// by finite differences of the gradient) orthogonalized against the normal,
/// scale = cell size, opacity = exp(-s^2 / beta).
GeometryInitResult init_splats_from_sdf(const SdfField& field, const GeometryInitConfig& cfg);

struct SkyInitConfig {
  int64_t n_splats = 1000;
  double radius_factor = 2.0;  // times the scene-bounds circumradius
  int sh_degree = 2;
};

/// Opaque inward-facing disks tiled on a sphere around the scene by a
/// Fibonacci spiral, sized for roughly twofold coverage overlap.
std::vector<SplatDisk> init_sky(const Aabb& scene_bounds, const SkyInitConfig& cfg);

struct ColorPretrainConfig {
  double lr = 2.5e-3;
  int epochs = 1;
  uint64_t seed = 1;
};

struct ColorPretrainReport {
  double loss_before = 0;
  double loss_after = 0;
  int64_t steps = 0;
};

/// Fits only the color coefficients against the training views for the given
/// number of epochs (one shuffled pass each). Every structural attribute is
/// left bitwise unchanged.
ColorPretrainReport color_pretrain(SplatScene& scene, const std::vector<CameraFrame>& views,
                                   const ColorPretrainConfig& cfg);

}  // namespace gssdf
