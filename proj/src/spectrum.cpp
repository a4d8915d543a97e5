#include "xsr/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "xsr/error.hpp"

namespace xsr {

HalfSpectrum::HalfSpectrum(int h_, int w_) : h(h_), w(w_) {
  coef.assign(static_cast<std::size_t>(h) * half_width(), cplx{});
}

const FftPlan& fft_plan(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<FftPlan>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftPlan>(n);
  return *slot;
}

namespace {

// Images this small are transformed without spawning threads.
constexpr std::size_t kParallelPixels = 64 * 64;

// Real row transform: two rows ride in one complex FFT (z = a + i b) and are
// separated through conjugate symmetry.
void row_pass(const Image& img, HalfSpectrum& out, bool parallel) {
  const int h = img.h(), w = img.w(), wh = out.half_width();
  const FftPlan& plan = fft_plan(static_cast<std::size_t>(w));
  const int pairs = (h + 1) / 2;
#pragma omp parallel if (parallel)
  {
    std::vector<cplx> z(static_cast<std::size_t>(w)), scratch(plan.scratch_size());
#pragma omp for schedule(static)
    for (int p = 0; p < pairs; ++p) {
      const int r0 = 2 * p, r1 = 2 * p + 1;
      const bool two = r1 < h;
      for (int x = 0; x < w; ++x) z[x] = {img.at(r0, x), two ? img.at(r1, x) : 0.0};
      plan.forward(z, scratch);
      for (int kx = 0; kx < wh; ++kx) {
        const cplx zk = z[kx];
        const cplx zc = std::conj(z[(w - kx) % w]);
        out.at(r0, kx) = 0.5 * (zk + zc);
        if (two) out.at(r1, kx) = cplx(0.0, -0.5) * (zk - zc);
      }
    }
  }
}

void column_pass(HalfSpectrum& s, bool inverse, bool parallel) {
  const int h = s.h, wh = s.half_width();
  const FftPlan& plan = fft_plan(static_cast<std::size_t>(h));
#pragma omp parallel if (parallel)
  {
    std::vector<cplx> col(static_cast<std::size_t>(h)), scratch(plan.scratch_size());
#pragma omp for schedule(static)
    for (int kx = 0; kx < wh; ++kx) {
      for (int y = 0; y < h; ++y) col[y] = s.at(y, kx);
      if (inverse)
        plan.inverse(col, scratch);
      else
        plan.forward(col, scratch);
      for (int y = 0; y < h; ++y) s.at(y, kx) = col[y];
    }
  }
}

HalfSpectrum rfft2_impl(const Image& img, bool parallel) {
  require(img.h() >= 2 && img.w() >= 2, "rfft2: image must be at least 2x2");
  HalfSpectrum s(img.h(), img.w());
  row_pass(img, s, parallel);
  column_pass(s, false, parallel);
  // Self-conjugate bins of a real signal are real.
  const int wh = s.half_width();
  for (int ky : {0, s.h % 2 == 0 ? s.h / 2 : 0})
    for (int kx : {0, s.w % 2 == 0 ? wh - 1 : 0}) s.at(ky, kx).imag(0.0);
  return s;
}

}  // namespace

HalfSpectrum rfft2(const Image& img) { return rfft2_impl(img, img.size() >= kParallelPixels); }

HalfSpectrum rfft2_serial(const Image& img) { return rfft2_impl(img, false); }

Image adjoint_rfft2(const HalfSpectrum& cotangent, int h, int w) {
  require(h >= 1 && w >= 1 && cotangent.h == h && cotangent.w == w &&
              cotangent.coef.size() == static_cast<std::size_t>(h) * (w / 2 + 1),
          "adjoint_rfft2: cotangent shape does not match (h, w)");
  const bool parallel = static_cast<std::size_t>(h) * w >= kParallelPixels;
  HalfSpectrum z = cotangent;
  column_pass(z, true, parallel);
  const int wh = z.half_width();
  const FftPlan& plan = fft_plan(static_cast<std::size_t>(w));
  Image out(h, w);
#pragma omp parallel if (parallel)
  {
    std::vector<cplx> row(static_cast<std::size_t>(w)), scratch(plan.scratch_size());
#pragma omp for schedule(static)
    for (int y = 0; y < h; ++y) {
      std::fill(row.begin(), row.end(), cplx{});
      for (int kx = 0; kx < wh; ++kx) row[kx] = z.at(y, kx);
      plan.inverse(row, scratch);
      for (int x = 0; x < w; ++x) out.at(y, x) = row[x].real();
    }
  }
  return out;
}

double half_column_weight(int kx, int w) {
  if (kx == 0) return 1.0;
  if (w % 2 == 0 && kx == w / 2) return 1.0;
  return 2.0;
}

Image irfft2(const HalfSpectrum& spec) {
  HalfSpectrum weighted = spec;
  const int wh = spec.half_width();
  const double scale = 1.0 / (static_cast<double>(spec.h) * spec.w);
  for (int ky = 0; ky < spec.h; ++ky)
    for (int kx = 0; kx < wh; ++kx) weighted.at(ky, kx) *= half_column_weight(kx, spec.w) * scale;
  return adjoint_rfft2(weighted, spec.h, spec.w);
}

FullSpectrum full_spectrum(const HalfSpectrum& spec) {
  FullSpectrum f{spec.h, spec.w, std::vector<cplx>(static_cast<std::size_t>(spec.h) * spec.w)};
  const int wh = spec.half_width();
  for (int ky = 0; ky < spec.h; ++ky)
    for (int kx = 0; kx < spec.w; ++kx) {
      const cplx v = kx < wh ? spec.at(ky, kx) : std::conj(spec.at((spec.h - ky) % spec.h, spec.w - kx));
      f.coef[static_cast<std::size_t>(ky) * spec.w + kx] = v;
    }
  return f;
}

Image log_magnitude_raw(const Image& img) {
  const FullSpectrum f = full_spectrum(rfft2(img));
  Image out(f.h, f.w);
  const int oy = f.h / 2, ox = f.w / 2;
  for (int ky = 0; ky < f.h; ++ky)
    for (int kx = 0; kx < f.w; ++kx) out.at((ky + oy) % f.h, (kx + ox) % f.w) = std::log1p(std::abs(f.at(ky, kx)));
  return out;
}

Image log_magnitude(const Image& img) {
  Image out = log_magnitude_raw(img);
  const auto [lo, hi] = std::minmax_element(out.pixels().begin(), out.pixels().end());
  const double a = *lo, range = *hi - *lo;
  for (double& v : out.pixels()) v = range > 0 ? (v - a) / range : 0.0;
  return out;
}

}  // namespace xsr
