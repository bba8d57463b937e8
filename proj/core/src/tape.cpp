#include "gssdf/tape.hpp"

#include <cmath>
#include <functional>

#include "gssdf/common.hpp"

namespace gssdf {

namespace {

/// Generic elementwise/glue op: forward already done, backward is a closure.
class LambdaOp final : public TapeOp {
 public:
  LambdaOp(const char* name, std::function<void(Tape&)> bwd)
      : name_(name), bwd_(std::move(bwd)) {}
  const char* name() const override { return name_; }
  void backward(Tape& tape) override { bwd_(tape); }

 private:
  const char* name_;
  std::function<void(Tape&)> bwd_;
};

}  // namespace

void Tape::check_finite(const std::vector<double>& v, int op_index, const char* op_name,
                        const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      fail("tape op " + std::to_string(op_index) + " (" + op_name + "): non-finite " + what);
    }
  }
}

ValueId Tape::alloc_value(std::vector<double> v) {
  values_.push_back(std::move(v));
  grads_.emplace_back(values_.back().size(), 0.0);
  return static_cast<ValueId>(values_.size() - 1);
}

ValueId Tape::alloc_zeros(size_t n) { return alloc_value(std::vector<double>(n, 0.0)); }

ValueId Tape::leaf(ParamTensor& p) {
  ValueId out = alloc_value(std::vector<double>(p.data(), p.data() + p.size()));
  record<LambdaOp>("leaf", [out, &p](Tape& t) {
    const auto& g = t.grad(out);
    double* pg = p.grad();
    for (size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
  });
  return out;
}

ValueId Tape::constant(std::vector<double> v) {
  ValueId out = alloc_value(std::move(v));
  record<LambdaOp>("constant", [](Tape&) {});
  return out;
}

#define GSSDF_BINARY_OP(opname, fwd_expr, bwd_a, bwd_b)                                   \
  ValueId Tape::opname(ValueId a, ValueId b) {                                            \
    const auto& va = value(a);                                                            \
    const auto& vb = value(b);                                                            \
    require(va.size() == vb.size(), #opname ": size mismatch");                           \
    std::vector<double> out(va.size());                                                   \
    for (size_t i = 0; i < va.size(); ++i) out[i] = (fwd_expr);                           \
    ValueId o = alloc_value(std::move(out));                                              \
    TapeOp* op = record<LambdaOp>(#opname, [a, b, o](Tape& t) {                           \
      const auto& go = t.grad(o);                                                         \
      const auto& va2 = t.value(a);                                                       \
      const auto& vb2 = t.value(b);                                                       \
      (void)va2;                                                                          \
      (void)vb2;                                                                          \
      auto& ga = t.grad(a);                                                               \
      auto& gb = t.grad(b);                                                               \
      for (size_t i = 0; i < go.size(); ++i) {                                            \
        ga[i] += (bwd_a);                                                                 \
        gb[i] += (bwd_b);                                                                 \
      }                                                                                   \
    });                                                                                   \
    check_finite(value(o), op->index, #opname, "output");                                 \
    return o;                                                                             \
  }

GSSDF_BINARY_OP(add, va[i] + vb[i], go[i], go[i])
GSSDF_BINARY_OP(sub, va[i] - vb[i], go[i], -go[i])
GSSDF_BINARY_OP(mul, va[i] * vb[i], go[i] * vb2[i], go[i] * va2[i])
#undef GSSDF_BINARY_OP

#define GSSDF_UNARY_OP(opname, label, fwd_expr, bwd_expr)                        \
  ValueId Tape::opname(ValueId a) {                                             \
    const auto& va = value(a);                                                   \
    std::vector<double> out(va.size());                                          \
    for (size_t i = 0; i < va.size(); ++i) out[i] = (fwd_expr);                  \
    ValueId o = alloc_value(std::move(out));                                     \
    TapeOp* op = record<LambdaOp>(label, [a, o](Tape& t) {                       \
      const auto& go = t.grad(o);                                                \
      const auto& va2 = t.value(a);                                              \
      const auto& vo = t.value(o);                                               \
      (void)va2;                                                                 \
      (void)vo;                                                                  \
      auto& ga = t.grad(a);                                                      \
      for (size_t i = 0; i < go.size(); ++i) ga[i] += (bwd_expr);                \
    });                                                                          \
    check_finite(value(o), op->index, label, "output");                          \
    return o;                                                                    \
  }

GSSDF_UNARY_OP(square, "square", va[i] * va[i], go[i] * 2.0 * va2[i])
GSSDF_UNARY_OP(exp_op, "exp", std::exp(va[i]), go[i] * vo[i])
GSSDF_UNARY_OP(log_op, "log", std::log(va[i]), go[i] / va2[i])
GSSDF_UNARY_OP(sigmoid_op, "sigmoid", sigmoid(va[i]), go[i] * vo[i] * (1.0 - vo[i]))
GSSDF_UNARY_OP(relu, "relu", va[i] > 0.0 ? va[i] : 0.0, va2[i] > 0.0 ? go[i] : 0.0)
#undef GSSDF_UNARY_OP

ValueId Tape::scale(ValueId a, double k) {
  const auto& va = value(a);
  std::vector<double> out(va.size());
  for (size_t i = 0; i < va.size(); ++i) out[i] = k * va[i];
  ValueId o = alloc_value(std::move(out));
  TapeOp* op = record<LambdaOp>("scale", [a, o, k](Tape& t) {
    const auto& go = t.grad(o);
    auto& ga = t.grad(a);
    for (size_t i = 0; i < go.size(); ++i) ga[i] += k * go[i];
  });
  check_finite(value(o), op->index, "scale", "output");
  return o;
}

ValueId Tape::add_const(ValueId a, double k) {
  const auto& va = value(a);
  std::vector<double> out(va.size());
  for (size_t i = 0; i < va.size(); ++i) out[i] = va[i] + k;
  ValueId o = alloc_value(std::move(out));
  record<LambdaOp>("add_const", [a, o](Tape& t) {
    const auto& go = t.grad(o);
    auto& ga = t.grad(a);
    for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
  });
  return o;
}

ValueId Tape::sum(ValueId a) {
  const auto& va = value(a);
  double s = 0.0;
  for (double v : va) s += v;
  ValueId o = alloc_value({s});
  TapeOp* op = record<LambdaOp>("sum", [a, o](Tape& t) {
    const double go = t.grad(o)[0];
    auto& ga = t.grad(a);
    for (double& g : ga) g += go;
  });
  check_finite(value(o), op->index, "sum", "output");
  return o;
}

ValueId Tape::dot_const(ValueId a, std::vector<double> w) {
  const auto& va = value(a);
  require(va.size() == w.size(), "dot_const: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < va.size(); ++i) s += w[i] * va[i];
  ValueId o = alloc_value({s});
  TapeOp* op = record<LambdaOp>("dot_const", [a, o, w = std::move(w)](Tape& t) {
    const double go = t.grad(o)[0];
    auto& ga = t.grad(a);
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += go * w[i];
  });
  check_finite(value(o), op->index, "dot_const", "output");
  return o;
}

ValueId Tape::weighted_sum(const std::vector<ValueId>& terms, const std::vector<double>& coeffs) {
  require(terms.size() == coeffs.size(), "weighted_sum: arity mismatch");
  double s = 0.0;
  for (size_t i = 0; i < terms.size(); ++i) {
    require(value(terms[i]).size() == 1, "weighted_sum: scalar terms only");
    s += coeffs[i] * scalar(terms[i]);
  }
  ValueId o = alloc_value({s});
  TapeOp* op = record<LambdaOp>("weighted_sum", [terms, coeffs, o](Tape& t) {
    const double go = t.grad(o)[0];
    for (size_t i = 0; i < terms.size(); ++i) t.grad(terms[i])[0] += coeffs[i] * go;
  });
  check_finite(value(o), op->index, "weighted_sum", "output");
  return o;
}

void Tape::backward(ValueId loss, double seed) {
  require(value(loss).size() == 1, "backward: loss must be scalar");
  for (auto& g : grads_) std::fill(g.begin(), g.end(), 0.0);
  grad(loss)[0] = seed;
  for (size_t i = ops_.size(); i-- > 0;) {
    ops_[i]->backward(*this);
  }
}

}  // namespace gssdf
