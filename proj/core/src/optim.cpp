#include "gssdf/optim.hpp"

#include <cmath>

#include "gssdf/common.hpp"

namespace gssdf {

void AdamState::match(std::span<ParamTensor* const> params) {
  per_tensor.resize(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const size_t n = static_cast<size_t>(params[i]->size());
    if (per_tensor[i].m.size() != n) {
      per_tensor[i].m.assign(n, 0.0);
      per_tensor[i].v.assign(n, 0.0);
    }
  }
}

void AdamState::keep_rows(size_t tensor_idx, const std::vector<uint8_t>& keep,
                          int64_t row_stride) {
  auto compact = [&](std::vector<double>& buf) {
    int64_t out = 0;
    const int64_t rows = static_cast<int64_t>(keep.size());
    for (int64_t r = 0; r < rows; ++r) {
      if (!keep[static_cast<size_t>(r)]) continue;
      for (int64_t k = 0; k < row_stride; ++k)
        buf[static_cast<size_t>(out * row_stride + k)] = buf[static_cast<size_t>(r * row_stride + k)];
      ++out;
    }
    buf.resize(static_cast<size_t>(out * row_stride));
  };
  compact(per_tensor[tensor_idx].m);
  compact(per_tensor[tensor_idx].v);
}

void AdamState::append_rows(size_t tensor_idx, int64_t count, int64_t row_stride) {
  per_tensor[tensor_idx].m.resize(per_tensor[tensor_idx].m.size() +
                                      static_cast<size_t>(count * row_stride),
                                  0.0);
  per_tensor[tensor_idx].v.resize(per_tensor[tensor_idx].v.size() +
                                      static_cast<size_t>(count * row_stride),
                                  0.0);
}

void adam_step(std::span<ParamTensor* const> params, AdamState& state, const AdamConfig& cfg,
               int64_t t) {
  require(t >= 1, "adam_step: step index must be >= 1 (bias correction undefined at t=0)");
  state.match(params);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    ParamTensor& p = *params[pi];
    auto& m = state.per_tensor[pi].m;
    auto& v = state.per_tensor[pi].v;
    double* val = p.data();
    double* g = p.grad();
    const int64_t n = p.size();
    for (int64_t i = 0; i < n; ++i) {
      m[static_cast<size_t>(i)] = cfg.beta1 * m[static_cast<size_t>(i)] + (1.0 - cfg.beta1) * g[i];
      v[static_cast<size_t>(i)] =
          cfg.beta2 * v[static_cast<size_t>(i)] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[static_cast<size_t>(i)] / bc1;
      const double vhat = v[static_cast<size_t>(i)] / bc2;
      const double upd = cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      val[i] -= upd;
      if (!std::isfinite(val[i])) {
        fail("adam_step: non-finite value in tensor '" + p.name() + "' at index " +
             std::to_string(i));
      }
      g[i] = 0.0;
    }
  }
}

AdamGroup::AdamGroup(std::vector<ParamTensor*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  state_.match(params_);
}

void AdamGroup::step() {
  ++t_;
  adam_step(params_, state_, cfg_, t_);
}

void AdamGroup::keep_rows(const std::vector<uint8_t>& keep) {
  for (size_t i = 0; i < params_.size(); ++i) {
    state_.match(params_);
    state_.keep_rows(i, keep, params_[i]->row_stride());
    params_[i]->keep_rows(keep);
  }
}

void AdamGroup::append_rows(int64_t count) {
  state_.match(params_);
  for (size_t i = 0; i < params_.size(); ++i) {
    state_.append_rows(i, count, params_[i]->row_stride());
    params_[i]->append_rows(count);
  }
}

}  // namespace gssdf
