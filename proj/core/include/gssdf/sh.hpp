#pragma once

#include "gssdf/common.hpp"

namespace gssdf {

constexpr int kMaxShDegree = 3;

inline int sh_basis_count(int degree) { return (degree + 1) * (degree + 1); }

/// Real spherical harmonics basis evaluated at a unit direction.
/// `out` must hold sh_basis_count(degree) values.
void sh_eval_basis(int degree, const Vec3& dir, double* out);

/// View-dependent color: coeffs are [basis][rgb] row-major, result is
/// sum_b coeffs[b] * Y_b(dir) + 0.5, clamped to >= 0 per channel.
Vec3 sh_color(const double* coeffs, int degree, const Vec3& dir);

}  // namespace gssdf
