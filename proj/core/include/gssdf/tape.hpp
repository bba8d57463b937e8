#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gssdf/tensor.hpp"

namespace gssdf {

class Tape;

/// Id of a value produced on the tape during the forward pass.
using ValueId = int32_t;

/// One recorded primitive operation. Heavy pipeline stages (field queries,
/// rasterization, shape regularization) implement this interface with
/// hand-derived analytic adjoints and register as a single op.
class TapeOp {
 public:
  virtual ~TapeOp() = default;
  virtual const char* name() const = 0;
  /// Pulls adjoints from outputs, pushes into inputs and/or ParamTensor grads.
  virtual void backward(Tape& tape) = 0;

  int index = -1;  // position on the tape, assigned at record time
};

/// Record of a forward pass: values plus the op sequence in creation
/// (topological) order. backward() walks ops exactly once in reverse.
class Tape {
 public:
  ValueId alloc_value(std::vector<double> v);
  ValueId alloc_zeros(size_t n);

  std::vector<double>& value(ValueId id) { return values_[static_cast<size_t>(id)]; }
  const std::vector<double>& value(ValueId id) const { return values_[static_cast<size_t>(id)]; }
  std::vector<double>& grad(ValueId id) { return grads_[static_cast<size_t>(id)]; }
  double scalar(ValueId id) const { return values_[static_cast<size_t>(id)].at(0); }

  /// Records a custom op (already forward-executed by its factory).
  template <class Op, class... Args>
  Op* record(Args&&... args) {
    auto op = std::make_unique<Op>(std::forward<Args>(args)...);
    Op* raw = op.get();
    raw->index = static_cast<int>(ops_.size());
    ops_.push_back(std::move(op));
    return raw;
  }

  // -- elementwise / reduction builders (small glue and test graphs) --
  ValueId leaf(ParamTensor& p);
  ValueId constant(std::vector<double> v);
  ValueId add(ValueId a, ValueId b);
  ValueId sub(ValueId a, ValueId b);
  ValueId mul(ValueId a, ValueId b);
  ValueId scale(ValueId a, double k);
  ValueId add_const(ValueId a, double k);
  ValueId square(ValueId a);
  ValueId exp_op(ValueId a);
  ValueId log_op(ValueId a);
  ValueId sigmoid_op(ValueId a);
  ValueId relu(ValueId a);
  ValueId sum(ValueId a);
  /// Scalar result: sum_i w[i] * a[i] with constant weights.
  ValueId dot_const(ValueId a, std::vector<double> w);
  /// Scalar result: sum_i coeff[i] * scalar_input[i].
  ValueId weighted_sum(const std::vector<ValueId>& terms, const std::vector<double>& coeffs);

  /// Seeds d(loss)/d(loss) = seed at `loss` (must be scalar) and runs every
  /// recorded op backward in reverse order. ParamTensor grads accumulate (+=);
  /// value adjoints are reset at entry, so calling backward twice doubles
  /// parameter grads.
  void backward(ValueId loss, double seed = 1.0);

  size_t num_ops() const { return ops_.size(); }
  size_t num_values() const { return values_.size(); }

  /// Throws naming `op_index` if any entry of v is non-finite.
  static void check_finite(const std::vector<double>& v, int op_index, const char* op_name,
                           const char* what);

 private:
  std::vector<std::vector<double>> values_;
  std::vector<std::vector<double>> grads_;
  std::vector<std::unique_ptr<TapeOp>> ops_;
};

}  // namespace gssdf
