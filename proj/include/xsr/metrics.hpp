#pragma once

#include <array>

#include "xsr/image.hpp"

namespace xsr {

inline constexpr double kPsnrCap = 100.0;

/// Peak 1.0; identical images report kPsnrCap.
double psnr(const Image& a, const Image& b);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Normalised 1-D Gaussian taps of the SSIM window.
std::array<double, kSsimWindow> ssim_taps();

/// Mean local SSIM over every fully-contained 11x11 window (L = 1).
double ssim(const Image& a, const Image& b);

struct MetricsSummary {
  double psnr_mean = 0.0;
  double ssim_mean = 0.0;
  double fd_mean = 0.0;
  int n = 0;
};

}  // namespace xsr
