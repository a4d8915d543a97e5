#pragma once

#include <complex>
#include <vector>

#include "xsr/fft.hpp"
#include "xsr/image.hpp"

namespace xsr {

/// Non-redundant half of the unnormalised 2-D DFT of a real h x w image:
/// rows 0..h-1, columns 0..w/2.
struct HalfSpectrum {
  int h = 0;
  int w = 0;
  std::vector<cplx> coef;  // row-major, h x half_width()

  HalfSpectrum() = default;
  HalfSpectrum(int h, int w);

  int half_width() const { return w / 2 + 1; }
  cplx& at(int ky, int kx) { return coef[static_cast<std::size_t>(ky) * half_width() + kx]; }
  const cplx& at(int ky, int kx) const { return coef[static_cast<std::size_t>(ky) * half_width() + kx]; }
};

/// Full h x w complex spectrum, row-major.
struct FullSpectrum {
  int h = 0;
  int w = 0;
  std::vector<cplx> coef;
  const cplx& at(int ky, int kx) const { return coef[static_cast<std::size_t>(ky) * w + kx]; }
};

/// Shared, immutable plan for length n (cached per process).
const FftPlan& fft_plan(std::size_t n);

HalfSpectrum rfft2(const Image& img);
HalfSpectrum rfft2_serial(const Image& img);

/// Exact adjoint of rfft2 as a real-linear map R^{hw} -> R^{2 h (w/2+1)}:
/// out[y,x] = Re(sum over the half grid of Y[k] exp(+2 pi i k.n)).
Image adjoint_rfft2(const HalfSpectrum& cotangent, int h, int w);

/// Inverse of rfft2 (includes the 1/(hw) factor).
Image irfft2(const HalfSpectrum& spec);

/// Per-column multiplicity of the half grid in the full spectrum (1 or 2).
double half_column_weight(int kx, int w);

FullSpectrum full_spectrum(const HalfSpectrum& spec);

/// log(1 + |S|) of the full spectrum, DC moved to (h/2, w/2). Not normalised.
Image log_magnitude_raw(const Image& img);

/// log_magnitude_raw min-max scaled to [0,1] for display.
Image log_magnitude(const Image& img);

}  // namespace xsr
