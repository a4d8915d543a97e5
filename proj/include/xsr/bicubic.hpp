#pragma once

#include "xsr/image.hpp"

namespace xsr {

inline constexpr double kCubicA = -0.5;

/// Cubic convolution kernel with a = -0.5, support [-2, 2].
double cubic_kernel(double x);

/// Separable cubic resampling with half-pixel-centred coordinates. When
/// shrinking, the kernel is stretched by the scale factor (antialiasing);
/// taps are renormalised to sum to one near borders. Output is clamped to [0,1].
Image bicubic_resample(const Image& img, int out_h, int out_w);

}  // namespace xsr
