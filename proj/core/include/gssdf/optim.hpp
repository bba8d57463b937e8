#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gssdf/tensor.hpp"

namespace gssdf {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers, one pair per tensor in the group.
struct AdamState {
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  std::vector<Moments> per_tensor;

  void match(std::span<ParamTensor* const> params);
  void keep_rows(size_t tensor_idx, const std::vector<uint8_t>& keep, int64_t row_stride);
  void append_rows(size_t tensor_idx, int64_t count, int64_t row_stride);
};

/// Standard Adam update with bias correction at step t (1-based). Grads are
/// zeroed afterwards. Throws if t == 0 or a non-finite value would be written.
void adam_step(std::span<ParamTensor* const> params, AdamState& state, const AdamConfig& cfg,
               int64_t t);

/// One parameter group with its own schedule-controlled learning rate.
class AdamGroup {
 public:
  AdamGroup() = default;
  AdamGroup(std::vector<ParamTensor*> params, AdamConfig cfg);

  void step();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t) { t_ = t; }

  AdamState& state() { return state_; }
  const AdamState& state() const { return state_; }
  std::span<ParamTensor* const> params() const { return params_; }

  /// Structural edits keep optimizer moments aligned with tensor rows.
  void keep_rows(const std::vector<uint8_t>& keep);
  void append_rows(int64_t count);

 private:
  std::vector<ParamTensor*> params_;
  AdamConfig cfg_;
  AdamState state_;
  int64_t t_ = 0;
};

}  // namespace gssdf
