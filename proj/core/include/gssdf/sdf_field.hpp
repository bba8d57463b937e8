#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gssdf/common.hpp"
#include "gssdf/tape.hpp"
#include "gssdf/tensor.hpp"

namespace gssdf {

/// Multi-resolution hash encoding layout. The concatenated feature width
/// (levels * features_per_level) is fixed at 32.
struct HashGridConfig {
  int levels = 16;
  int features_per_level = 2;
  int table_size_log2 = 19;
  int base_resolution = 16;
  double growth_factor = 1.5;
  Aabb bounds{Vec3(-1, -1, -1), Vec3(1, 1, 1)};

  int feature_width() const { return levels * features_per_level; }
  int resolution(int level) const;
  void validate() const;
};

struct SdfFieldConfig {
  HashGridConfig grid;
  int hidden_width = 64;
  int hidden_layers = 3;
  double beta_min = 1e-3;
};

/// Batched field outputs. `grad` is the spatial derivative d(sdf)/dx,
/// laid out [n][3]; filled only when requested.
struct FieldQueryResult {
  std::vector<double> sdf;
  std::vector<double> beta;
  std::vector<double> grad;
  std::vector<uint8_t> clamped;  // 1 where the query point was clamped to the bounds
};

/// Neural signed distance field: hash-grid encoding plus a small ReLU MLP
/// with a linear distance head and a softplus-floored scale head.
///
/// Forward, spatial gradients, and the parameter adjoint (including the
/// adjoint of the spatial gradient, as needed by the unit-gradient-norm
/// penalty) are fused, hand-derived batched kernels; the whole query
/// registers on a Tape as a single op.
class SdfField {
 public:
  SdfField(SdfFieldConfig cfg, uint64_t seed);

  const SdfFieldConfig& config() const { return cfg_; }
  const Aabb& bounds() const { return cfg_.grid.bounds; }

  /// Single-point query, (signed distance, scale). Non-finite input throws;
  /// out-of-bounds input is clamped to the boundary (flag via `clamped`).
  std::pair<double, double> query(const Vec3& x, bool* clamped = nullptr) const;

  /// Spatial derivative of the signed distance at x. `degenerate` is set when
  /// the gradient norm is below 1e-8 (callers needing a frame must fall back).
  Vec3 gradient(const Vec3& x, bool* degenerate = nullptr) const;

  /// Batched forward. xs is [n][3].
  void query_batch(const double* xs, int64_t n, bool want_gradient,
                   FieldQueryResult& out) const;

  /// Accumulates parameter gradients for the batch. sdf_adj/beta_adj are [n]
  /// (nullable = zero), grad_adj is [n][3] (nullable). Recomputes forward
  /// intermediates chunk-by-chunk; reduction order is thread-count invariant.
  void query_backward(const double* xs, int64_t n, const double* sdf_adj,
                      const double* beta_adj, const double* grad_adj);

  std::vector<ParamTensor*> params();
  ParamTensor& grid_tables() { return tables_; }
  int64_t table_offset(int level) const { return level_offsets_[static_cast<size_t>(level)]; }
  int64_t table_entries(int level) const;

  int64_t param_count() const;

  void save(std::ostream& os) const;
  static SdfField load(std::istream& is);

 private:
  friend struct FieldKernels;
  SdfFieldConfig cfg_;
  ParamTensor tables_;                  // flat [sum(level entries) * features]
  std::vector<ParamTensor> weights_;    // per layer, row-major [out][in]
  std::vector<ParamTensor> biases_;     // per layer [out]
  std::vector<int64_t> level_offsets_;  // into tables_, per level (entry units)
  std::vector<int64_t> level_sizes_;    // entries per level

  // Reused per-slot accumulation buffers for query_backward.
  struct SlotGrads {
    std::vector<std::vector<double>> dW, db;
    std::vector<double> dtab;
  };
  std::vector<SlotGrads> grad_scratch_;
};

/// Value ids produced by a field query recorded on a tape.
struct FieldQueryNodes {
  ValueId sdf = -1;
  ValueId beta = -1;
  ValueId grad = -1;  // -1 when not requested
  int64_t count = 0;
};

/// Records a batched field query as one tape op. Backward pulls the adjoints
/// of sdf/beta/grad values and accumulates into the field's parameters.
FieldQueryNodes field_query_op(Tape& tape, SdfField& field, std::vector<double> points,
                               bool want_gradient);

}  // namespace gssdf
