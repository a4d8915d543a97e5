#include "xsr/bicubic.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "xsr/error.hpp"

namespace xsr {

double cubic_kernel(double x) {
  constexpr double a = kCubicA;
  x = std::abs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
  return 0.0;
}

namespace {

struct Taps {
  std::vector<int> first;
  std::vector<int> count;
  std::vector<double> w;  // count.size() x stride
  int stride = 0;
};

Taps make_taps(int in, int out) {
  const double scale = static_cast<double>(in) / out;
  const double fs = std::max(scale, 1.0);
  const double support = 2.0 * fs;
  Taps t;
  t.stride = static_cast<int>(std::ceil(support)) * 2 + 1;
  t.first.resize(out);
  t.count.resize(out);
  t.w.assign(static_cast<std::size_t>(out) * t.stride, 0.0);
  for (int i = 0; i < out; ++i) {
    const double center = (i + 0.5) * scale;
    const int lo = std::max(static_cast<int>(center - support + 0.5), 0);
    const int hi = std::min(static_cast<int>(center + support + 0.5), in);
    double sum = 0;
    double* w = t.w.data() + static_cast<std::size_t>(i) * t.stride;
    for (int j = lo; j < hi; ++j) {
      w[j - lo] = cubic_kernel((j + 0.5 - center) / fs);
      sum += w[j - lo];
    }
    if (sum != 0)
      for (int j = 0; j < hi - lo; ++j) w[j] /= sum;
    t.first[i] = lo;
    t.count[i] = hi - lo;
  }
  return t;
}

}  // namespace

Image bicubic_resample(const Image& img, int out_h, int out_w) {
  require(out_h >= 1 && out_w >= 1, "bicubic_resample: output size must be >= 1");
  require(!img.empty(), "bicubic_resample: empty input");
  const Taps tx = make_taps(img.w(), out_w);
  const Taps ty = make_taps(img.h(), out_h);

  Image tmp(img.h(), out_w);
  for (int y = 0; y < img.h(); ++y)
    for (int x = 0; x < out_w; ++x) {
      const double* w = tx.w.data() + static_cast<std::size_t>(x) * tx.stride;
      double acc = 0;
      for (int j = 0; j < tx.count[x]; ++j) acc += w[j] * img.at(y, tx.first[x] + j);
      tmp.at(y, x) = acc;
    }

  Image out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const double* w = ty.w.data() + static_cast<std::size_t>(y) * ty.stride;
    for (int x = 0; x < out_w; ++x) {
      double acc = 0;
      for (int j = 0; j < ty.count[y]; ++j) acc += w[j] * tmp.at(ty.first[y] + j, x);
      out.at(y, x) = std::clamp(acc, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace xsr
