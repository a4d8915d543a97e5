#pragma once

// Straightforward reference implementations used to check the optimised code.
// None of these share code with the library beyond the Image container and
// the Weights layout accessors.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "xsr/image.hpp"
#include "xsr/network.hpp"

namespace oracle {

using xsr::Image;
using cd = std::complex<double>;

inline Image random_image(int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Image img(h, w);
  for (double& v : img.pixels()) v = u(rng);
  return img;
}

/// Full h x w unnormalised DFT, X[k] = sum x[n] exp(-2 pi i k.n / N), with
/// the phase reduced exactly in integers before the trig call.
inline std::vector<cd> dft2(const Image& img) {
  const int h = img.h(), w = img.w();
  const long period = static_cast<long>(h) * w;
  std::vector<cd> out(static_cast<std::size_t>(period));
  for (int ky = 0; ky < h; ++ky)
    for (int kx = 0; kx < w; ++kx) {
      cd acc = 0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const long m = (static_cast<long>(ky) * y * w + static_cast<long>(kx) * x * h) % period;
          const double ang = -2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(period);
          acc += img.at(y, x) * cd(std::cos(ang), std::sin(ang));
        }
      out[static_cast<std::size_t>(ky) * w + kx] = acc;
    }
  return out;
}

/// sum over the half grid (kx <= w/2) of |Re| + |Im| of dft2(sr - hr), / (h w).
inline double fd_loss(const Image& sr, const Image& hr) {
  Image d(sr.h(), sr.w());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = sr[i] - hr[i];
  const std::vector<cd> s = dft2(d);
  double acc = 0;
  for (int ky = 0; ky < d.h(); ++ky)
    for (int kx = 0; kx <= d.w() / 2; ++kx) {
      const cd c = s[static_cast<std::size_t>(ky) * d.w() + kx];
      acc += std::abs(c.real()) + std::abs(c.imag());
    }
  return acc / (static_cast<double>(d.h()) * d.w());
}

inline double mse(const Image& a, const Image& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

/// Local SSIM evaluated independently at every fully contained window with
/// the explicit 2-D Gaussian weights.
inline double ssim(const Image& a, const Image& b) {
  constexpr int n = 11;
  constexpr double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double g[n][n], total = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double di = i - 5, dj = j - 5;
      g[i][j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      total += g[i][j];
    }
  double sum = 0;
  int count = 0;
  for (int y0 = 0; y0 + n <= a.h(); ++y0)
    for (int x0 = 0; x0 + n <= a.w(); ++x0) {
      double ma = 0, mb = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          ma += g[i][j] / total * a.at(y0 + i, x0 + j);
          mb += g[i][j] / total * b.at(y0 + i, x0 + j);
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double da = a.at(y0 + i, x0 + j) - ma, db = b.at(y0 + i, x0 + j) - mb;
          va += g[i][j] / total * da * da;
          vb += g[i][j] / total * db * db;
          cov += g[i][j] / total * da * db;
        }
      sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return sum / count;
}

/// Keys cubic kernel, a = -0.5.
inline double keys(double x) {
  const double a = -0.5;
  x = std::abs(x);
  if (x < 1) return (a + 2) * x * x * x - (a + 3) * x * x + 1;
  if (x < 2) return a * x * x * x - 5 * a * x * x + 8 * a * x - 4 * a;
  return 0;
}

/// Row of normalised resampling weights for output sample i (PIL-style
/// support and centre), as a dense vector over the input samples.
inline std::vector<double> resample_weights(int in, int out, int i) {
  const double scale = static_cast<double>(in) / out;
  const double fs = std::max(scale, 1.0);
  const double center = (i + 0.5) * scale;
  const double support = 2.0 * fs;
  const int lo = std::max(static_cast<int>(center - support + 0.5), 0);
  const int hi = std::min(static_cast<int>(center + support + 0.5), in);
  std::vector<double> w(in, 0.0);
  double total = 0;
  for (int j = lo; j < hi; ++j) {
    w[j] = keys((j + 0.5 - center) / fs);
    total += w[j];
  }
  for (double& v : w) v /= total;
  return w;
}

/// Direct double sum out(i,j) = sum_y sum_x Wv(i,y) Wh(j,x) img(y,x), clamped.
inline Image bicubic(const Image& img, int oh, int ow) {
  Image out(oh, ow);
  for (int i = 0; i < oh; ++i) {
    const std::vector<double> wv = resample_weights(img.h(), oh, i);
    for (int j = 0; j < ow; ++j) {
      const std::vector<double> wh = resample_weights(img.w(), ow, j);
      double acc = 0;
      for (int y = 0; y < img.h(); ++y)
        for (int x = 0; x < img.w(); ++x) acc += wv[y] * wh[x] * img.at(y, x);
      out.at(i, j) = std::clamp(acc, 0.0, 1.0);
    }
  }
  return out;
}

using Tensor = std::vector<std::vector<double>>;  // [channel][y*w + x]

/// Zero-padded same-size 2-D cross-correlation by nested loops.
inline Tensor conv_same(const Tensor& in, int h, int w, const xsr::LayerShape& s, std::span<const double> kern,
                        std::span<const double> bias, bool relu) {
  const int r = s.k / 2;
  Tensor out(s.cout, std::vector<double>(static_cast<std::size_t>(h) * w));
  for (int co = 0; co < s.cout; ++co)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = bias[co];
        for (int ci = 0; ci < s.cin; ++ci)
          for (int ky = 0; ky < s.k; ++ky)
            for (int kx = 0; kx < s.k; ++kx) {
              const int yy = y + ky - r, xx = x + kx - r;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              acc += kern[((static_cast<std::size_t>(co) * s.cin + ci) * s.k + ky) * s.k + kx] *
                     in[ci][static_cast<std::size_t>(yy) * w + xx];
            }
        out[co][static_cast<std::size_t>(y) * w + x] = relu ? std::max(acc, 0.0) : acc;
      }
  return out;
}

inline Image forward(const xsr::Weights<double>& wts, const Image& input) {
  Tensor t{std::vector<double>(input.pixels().begin(), input.pixels().end())};
  for (int l = 0; l < xsr::NetworkConfig::kDepth; ++l) {
    const auto& s = xsr::NetworkConfig::layers[l];
    t = conv_same(t, input.h(), input.w(), s, wts.kernel(l), wts.bias(l), s.relu);
  }
  Image out(input.h(), input.w());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = t[0][i];
  return out;
}

/// Central difference (f(x+h) - f(x-h)) / 2h of a scalar function of one coordinate.
inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2 * h);
}

}  // namespace oracle
