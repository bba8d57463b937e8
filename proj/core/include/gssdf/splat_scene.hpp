#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gssdf/common.hpp"
#include "gssdf/optim.hpp"
#include "gssdf/rng.hpp"
#include "gssdf/sh.hpp"
#include "gssdf/tensor.hpp"

namespace gssdf {

/// One planar Gaussian primitive, value form (construction / inspection).
struct SplatDisk {
  Vec3 p = Vec3::Zero();
  Quat rot = Quat::Identity();  // frame columns [t_u, t_v, n]
  double s_u = 0.01, s_v = 0.01;
  double alpha = 0.5;
  std::vector<double> sh;  // [basis][rgb]; missing entries mean zero
  bool is_sky = false;
};

/// Gaussian weight at disk coordinates (u, v): exp(-(u^2+v^2)/2), in (0, 1].
inline double disk_kernel(double u, double v) { return std::exp(-0.5 * (u * u + v * v)); }

/// Affine map from disk coordinates to world space.
inline Vec3 disk_point(const Vec3& p, const Vec3& t_u, const Vec3& t_v, double s_u, double s_v,
                       double u, double v) {
  return p + s_u * u * t_u + s_v * v * t_v;
}

/// Rotation matrix of a (not necessarily unit) quaternion; normalizes first.
Mat3 rotation_from_quat(const double* q_raw);

/// Adjoint of rotation_from_quat: given dL/dR accumulates dL/dq_raw,
/// including the normalization term.
void rotation_backward(const double* q_raw, const Mat3& r_adj, double* q_adj);

struct DensifyReport {
  int64_t cloned = 0;
  int64_t split = 0;
  int64_t pruned = 0;
  int64_t total_after = 0;
};

struct DensifyConfig {
  double grad_threshold = 2e-4;
  double opacity_floor = 0.05;
  double scale_split = 0.02;  // world units; splats larger than this split
  double split_shrink = 1.6;
  int64_t max_splats = 0;  // 0 = unlimited; clones/splits stop at the cap
};

/// Container for the splat set. Attributes are stored in optimizer-friendly
/// parameterizations: log scales, logit opacity, raw quaternions (renormalized
/// after each step).
class SplatScene {
 public:
  explicit SplatScene(int sh_degree = 2);

  int64_t size() const { return positions_.rows(); }
  int sh_degree() const { return sh_degree_; }
  int sh_coeff_count() const { return 3 * sh_basis_count(sh_degree_); }

  void append(std::span<const SplatDisk> splats, std::span<AdamGroup*> groups = {});
  SplatDisk get(int64_t i) const;

  // Attribute access (derived quantities are computed on the fly).
  Vec3 position(int64_t i) const;
  Mat3 frame(int64_t i) const;  // columns [t_u, t_v, n]
  Vec2 scales(int64_t i) const;
  double opacity(int64_t i) const;
  const double* sh_coeffs(int64_t i) const;
  bool is_sky(int64_t i) const { return sky_[static_cast<size_t>(i)] != 0; }
  int64_t sky_count() const;

  ParamTensor& positions() { return positions_; }
  ParamTensor& rotations() { return rotations_; }
  ParamTensor& log_scales() { return log_scales_; }
  ParamTensor& opacity_logits() { return opacity_logits_; }
  ParamTensor& sh() { return sh_; }
  const ParamTensor& positions() const { return positions_; }
  const ParamTensor& rotations() const { return rotations_; }
  const ParamTensor& log_scales() const { return log_scales_; }
  const ParamTensor& opacity_logits() const { return opacity_logits_; }
  const ParamTensor& sh() const { return sh_; }

  std::vector<ParamTensor*> structural_params();  // everything except sh
  std::vector<ParamTensor*> all_params();

  /// Post-step projections: renormalize quaternions, clamp scales.
  void renormalize_rotations();
  void clamp_scales(double s_min, double s_max);

  // Per-interval densification statistics, filled by the rasterizer backward.
  struct Stats {
    std::vector<double> pos_grad_norm_sum;  // view-space positional gradient
    std::vector<int32_t> pos_grad_count;
    std::vector<double> max_kernel;
    void reset(int64_t n);
    void ensure(int64_t n);
  };
  Stats& stats() { return stats_; }

  /// Adaptive density control. Sky splats are exempt from pruning and
  /// splitting. Throws if the scene would become empty. Optimizer groups, when
  /// given, are kept row-consistent with the edits.
  DensifyReport densify_and_prune(const DensifyConfig& cfg, Rng& rng,
                                  std::span<AdamGroup*> groups = {});

  void save(std::ostream& os) const;
  static SplatScene load(std::istream& is);

  /// Splat attributes as a point-cloud PLY (binary little-endian).
  void export_ply(const std::string& path) const;

 private:
  int sh_degree_;
  ParamTensor positions_;       // (N, 3)
  ParamTensor rotations_;       // (N, 4) w x y z
  ParamTensor log_scales_;      // (N, 2)
  ParamTensor opacity_logits_;  // (N, 1)
  ParamTensor sh_;              // (N, 3 * basis)
  std::vector<uint8_t> sky_;
  Stats stats_;
};

}  // namespace gssdf
