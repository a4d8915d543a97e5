#include "xsr/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xsr/error.hpp"

namespace xsr {

namespace {

constexpr std::size_t kMaxDirectRadix = 31;

std::vector<std::size_t> factorize(std::size_t n) {
  std::vector<std::size_t> f;
  while (n % 4 == 0) {
    f.push_back(4);
    n /= 4;
  }
  for (std::size_t p = 2; p * p <= n; ++p)
    while (n % p == 0) {
      f.push_back(p);
      n /= p;
    }
  if (n > 1) f.push_back(n);
  return f;
}

std::vector<cplx> twiddles(std::size_t n, double sign) {
  std::vector<cplx> tw(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double a = sign * 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    tw[j] = {std::cos(a), std::sin(a)};
  }
  return tw;
}

}  // namespace

struct FftPlan::Chirp {
  std::size_t m = 0;                  // power-of-two convolution length
  std::vector<cplx> w;                // exp(-i pi k^2 / n)
  std::vector<cplx> kernel_spectrum;  // FFT_m of conj chirp, wrapped
  std::unique_ptr<FftPlan> conv;
};

FftPlan::FftPlan(std::size_t n) : n_(n) {
  require(n >= 1, "FftPlan: length must be >= 1");
  const auto factors = factorize(n);
  const bool direct = std::all_of(factors.begin(), factors.end(), [](std::size_t p) { return p <= kMaxDirectRadix; });
  if (direct) {
    std::size_t rem = n;
    for (std::size_t p : factors) {
      rem /= p;
      stages_.push_back({p, rem});
    }
    tw_fwd_ = twiddles(n, -1.0);
    tw_inv_ = twiddles(n, +1.0);
    return;
  }
  chirp_ = std::make_unique<Chirp>();
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  chirp_->m = m;
  chirp_->conv = std::make_unique<FftPlan>(m);
  chirp_->w.resize(n);
  const std::size_t two_n = 2 * n;
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the chirp phase exact for large k.
    const std::size_t k2 = static_cast<std::size_t>((static_cast<unsigned __int128>(k) * k) % two_n);
    const double a = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
    chirp_->w[k] = {std::cos(a), std::sin(a)};
  }
  chirp_->kernel_spectrum.assign(m, cplx{});
  chirp_->kernel_spectrum[0] = std::conj(chirp_->w[0]);
  for (std::size_t k = 1; k < n; ++k) {
    chirp_->kernel_spectrum[k] = std::conj(chirp_->w[k]);
    chirp_->kernel_spectrum[m - k] = std::conj(chirp_->w[k]);
  }
  chirp_->conv->forward(chirp_->kernel_spectrum);
}

FftPlan::~FftPlan() = default;
FftPlan::FftPlan(FftPlan&&) noexcept = default;
FftPlan& FftPlan::operator=(FftPlan&&) noexcept = default;

std::size_t FftPlan::scratch_size() const {
  if (chirp_) return 2 * chirp_->m + chirp_->conv->scratch_size();
  return n_;
}

void FftPlan::forward(std::span<cplx> data, std::span<cplx> scratch) const { transform(data, scratch, false); }
void FftPlan::inverse(std::span<cplx> data, std::span<cplx> scratch) const { transform(data, scratch, true); }

void FftPlan::forward(std::span<cplx> data) const {
  std::vector<cplx> scratch(scratch_size());
  transform(data, scratch, false);
}

void FftPlan::inverse(std::span<cplx> data) const {
  std::vector<cplx> scratch(scratch_size());
  transform(data, scratch, true);
}

void FftPlan::transform(std::span<cplx> data, std::span<cplx> scratch, bool inv) const {
  require(data.size() == n_, "FftPlan: data length does not match plan");
  require(scratch.size() >= scratch_size(), "FftPlan: scratch too small");
  if (n_ == 1) return;

  if (!chirp_) {
    std::copy(data.begin(), data.end(), scratch.begin());
    mixed_radix(data.data(), scratch.data(), 1, 0, inv ? tw_inv_.data() : tw_fwd_.data());
    return;
  }

  // Bluestein: inverse(x) = conj(forward(conj(x))).
  const std::size_t m = chirp_->m;
  std::span<cplx> a = scratch.subspan(0, m);
  std::span<cplx> inner = scratch.subspan(2 * m);
  for (std::size_t k = 0; k < n_; ++k) a[k] = (inv ? std::conj(data[k]) : data[k]) * chirp_->w[k];
  std::fill(a.begin() + static_cast<std::ptrdiff_t>(n_), a.end(), cplx{});
  chirp_->conv->forward(a, inner);
  for (std::size_t k = 0; k < m; ++k) a[k] *= chirp_->kernel_spectrum[k];
  chirp_->conv->inverse(a, inner);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n_; ++k) {
    const cplx v = a[k] * scale * chirp_->w[k];
    data[k] = inv ? std::conj(v) : v;
  }
}

// Decimation in time: `in` is read with stride `fstride`, `out` is contiguous.
void FftPlan::mixed_radix(cplx* out, const cplx* in, std::size_t fstride, std::size_t stage, const cplx* tw) const {
  const std::size_t p = stages_[stage].radix;
  const std::size_t m = stages_[stage].m;

  if (m == 1) {
    for (std::size_t q = 0; q < p; ++q) out[q] = in[q * fstride];
  } else {
    for (std::size_t q = 0; q < p; ++q) mixed_radix(out + q * m, in + q * fstride, fstride * p, stage + 1, tw);
  }

  if (p == 2) {
    for (std::size_t k = 0; k < m; ++k) {
      const cplx t = out[k + m] * tw[k * fstride];
      out[k + m] = out[k] - t;
      out[k] += t;
    }
    return;
  }
  if (p == 4) {
    // +/- i depends on the transform direction; tw[n/4] is -i forward, +i inverse.
    const cplx rot = tw[n_ / 4];
    for (std::size_t k = 0; k < m; ++k) {
      const cplx a0 = out[k];
      const cplx a1 = out[k + m] * tw[k * fstride];
      const cplx a2 = out[k + 2 * m] * tw[2 * k * fstride];
      const cplx a3 = out[k + 3 * m] * tw[3 * k * fstride];
      const cplx s02 = a0 + a2, d02 = a0 - a2;
      const cplx s13 = a1 + a3, d13 = (a1 - a3) * rot;
      out[k] = s02 + s13;
      out[k + m] = d02 + d13;
      out[k + 2 * m] = s02 - s13;
      out[k + 3 * m] = d02 - d13;
    }
    return;
  }

  const std::size_t step = n_ / p;
  cplx x[kMaxDirectRadix];
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t q = 0; q < p; ++q) x[q] = q == 0 ? out[k] : out[k + q * m] * tw[q * k * fstride];
    for (std::size_t q2 = 0; q2 < p; ++q2) {
      cplx acc = x[0];
      for (std::size_t q = 1; q < p; ++q) acc += x[q] * tw[((q * q2) % p) * step];
      out[k + q2 * m] = acc;
    }
  }
}

}  // namespace xsr
