#pragma once

#include "gssdf/image.hpp"

namespace gssdf {

/// Windowed SSIM, 11x11 Gaussian window sigma 1.5, C1=(0.01)^2, C2=(0.03)^2
/// on unit dynamic range. The mean runs over window positions fully inside
/// the image (valid windows) and over channels.
double ssim_mean(const Image& a, const Image& b);

/// Adds d(ssim_mean)/d(a) * adj into a_grad (same shape as a).
void ssim_backward(const Image& a, const Image& b, double adj, Image& a_grad);

}  // namespace gssdf
