#include "gssdf/tensor.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

#include "gssdf/common.hpp"

namespace gssdf {

ParamTensor::ParamTensor(std::string name, std::vector<int64_t> shape)
    : name_(std::move(name)), shape_(std::move(shape)) {
  int64_t n = 1;
  for (int64_t d : shape_) n *= d;
  values_.assign(static_cast<size_t>(n), 0.0);
  grad_.assign(static_cast<size_t>(n), 0.0);
}

void ParamTensor::zero_grad() { std::memset(grad_.data(), 0, grad_.size() * sizeof(double)); }

void ParamTensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void ParamTensor::fill_normal(Rng& rng, double stddev) {
  for (double& v : values_) v = stddev * rng.normal();
}

void ParamTensor::fill_uniform(Rng& rng, double lo, double hi) {
  for (double& v : values_) v = rng.uniform(lo, hi);
}

void ParamTensor::resize(std::vector<int64_t> shape) {
  shape_ = std::move(shape);
  int64_t n = 1;
  for (int64_t d : shape_) n *= d;
  values_.assign(static_cast<size_t>(n), 0.0);
  grad_.assign(static_cast<size_t>(n), 0.0);
}

int64_t ParamTensor::row_stride() const {
  int64_t s = 1;
  for (size_t i = 1; i < shape_.size(); ++i) s *= shape_[i];
  return s;
}

void ParamTensor::append_rows(int64_t count) {
  require(!shape_.empty(), "append_rows on scalar tensor");
  const int64_t stride = row_stride();
  shape_[0] += count;
  values_.resize(values_.size() + static_cast<size_t>(count * stride), 0.0);
  grad_.resize(grad_.size() + static_cast<size_t>(count * stride), 0.0);
}

void ParamTensor::keep_rows(const std::vector<uint8_t>& keep) {
  require(!shape_.empty(), "keep_rows on scalar tensor");
  require(static_cast<int64_t>(keep.size()) == shape_[0], "keep mask size mismatch");
  const int64_t stride = row_stride();
  int64_t out = 0;
  for (int64_t r = 0; r < shape_[0]; ++r) {
    if (!keep[static_cast<size_t>(r)]) continue;
    if (out != r) {
      std::memcpy(values_.data() + out * stride, values_.data() + r * stride,
                  static_cast<size_t>(stride) * sizeof(double));
      std::memcpy(grad_.data() + out * stride, grad_.data() + r * stride,
                  static_cast<size_t>(stride) * sizeof(double));
    }
    ++out;
  }
  shape_[0] = out;
  values_.resize(static_cast<size_t>(out * stride));
  grad_.resize(static_cast<size_t>(out * stride));
}

bool ParamTensor::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace gssdf
