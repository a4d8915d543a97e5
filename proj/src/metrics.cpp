#include "xsr/metrics.hpp"

#include <cmath>
#include <vector>

#include "xsr/error.hpp"

namespace xsr {

double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b, "psnr");
  require(!a.empty(), "psnr: empty image");
  double se = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

std::array<double, kSsimWindow> ssim_taps() {
  std::array<double, kSsimWindow> g{};
  double sum = 0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double x = i - kSsimWindow / 2;
    g[i] = std::exp(-x * x / (2 * kSsimSigma * kSsimSigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  require(a.h() >= kSsimWindow && a.w() >= kSsimWindow, "ssim: image smaller than the 11x11 window");
  const auto g = ssim_taps();
  const int h = a.h(), w = a.w();
  const int oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  constexpr double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
  constexpr double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);

  // Horizontal pass of the five moment images, then vertical pass per output row.
  enum { kA, kB, kAA, kBB, kAB, kMoments };
  std::vector<double> hpass(static_cast<std::size_t>(kMoments) * h * ow);
  auto H = [&](int m, int y, int x) -> double& { return hpass[(static_cast<std::size_t>(m) * h + y) * ow + x]; };
#pragma omp parallel for schedule(static) if (h * w > 128 * 128)
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s[kMoments] = {};
      for (int t = 0; t < kSsimWindow; ++t) {
        const double va = a.at(y, x + t), vb = b.at(y, x + t), gt = g[t];
        s[kA] += gt * va;
        s[kB] += gt * vb;
        s[kAA] += gt * va * va;
        s[kBB] += gt * vb * vb;
        s[kAB] += gt * va * vb;
      }
      for (int m = 0; m < kMoments; ++m) H(m, y, x) = s[m];
    }

  std::vector<double> row_sum(static_cast<std::size_t>(oh), 0.0);
#pragma omp parallel for schedule(static) if (h * w > 128 * 128)
  for (int y = 0; y < oh; ++y) {
    double acc = 0;
    for (int x = 0; x < ow; ++x) {
      double s[kMoments] = {};
      for (int t = 0; t < kSsimWindow; ++t)
        for (int m = 0; m < kMoments; ++m) s[m] += g[t] * H(m, y + t, x);
      const double mu_a = s[kA], mu_b = s[kB];
      const double var_a = s[kAA] - mu_a * mu_a;
      const double var_b = s[kBB] - mu_b * mu_b;
      const double cov = s[kAB] - mu_a * mu_b;
      acc += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
    }
    row_sum[y] = acc;
  }
  double total = 0;
  for (double v : row_sum) total += v;
  return total / (static_cast<double>(oh) * ow);
}

}  // namespace xsr
