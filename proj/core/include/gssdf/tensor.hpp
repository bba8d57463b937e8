#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gssdf/rng.hpp"

namespace gssdf {

/// A trainable dense array: values plus a same-shape gradient accumulator.
/// All trainable state in the pipeline (hash tables, MLP weights, splat
/// attributes) lives in ParamTensors.
class ParamTensor {
 public:
  ParamTensor() = default;
  ParamTensor(std::string name, std::vector<int64_t> shape);

  const std::string& name() const { return name_; }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(values_.size()); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  double* grad() { return grad_.data(); }
  const double* grad() const { return grad_.data(); }

  std::span<double> values_span() { return values_; }
  std::span<const double> values_span() const { return values_; }
  std::span<double> grad_span() { return grad_; }
  std::span<const double> grad_span() const { return grad_; }

  double& operator[](int64_t i) { return values_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return values_[static_cast<size_t>(i)]; }

  void zero_grad();
  void fill(double v);
  void fill_normal(Rng& rng, double stddev);
  void fill_uniform(Rng& rng, double lo, double hi);

  /// Resizes to a new shape, preserving nothing. Gradients are zeroed.
  void resize(std::vector<int64_t> shape);

  /// Appends `count` rows (outer-dimension entries); used by densification.
  void append_rows(int64_t count);
  /// Keeps only the rows flagged true; used by pruning. Gradient rows follow.
  void keep_rows(const std::vector<uint8_t>& keep);

  int64_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  int64_t row_stride() const;

  bool all_finite() const;

 private:
  std::string name_;
  std::vector<int64_t> shape_;
  std::vector<double> values_;
  std::vector<double> grad_;
};

}  // namespace gssdf
