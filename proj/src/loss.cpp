#include "xsr/loss.hpp"

#include <cmath>
#include <limits>

#include "xsr/error.hpp"
#include "xsr/spectrum.hpp"

namespace xsr {

void LossWeights::validate() const {
  require(lambda_rec >= 0 && lambda_fd >= 0, "LossWeights: weights must be >= 0");
  require(lambda_adv == 0 && lambda_per == 0, "LossWeights: adversarial/perceptual terms are not supported");
}

namespace {

Image difference(const Image& hr, const Image& sr) {
  Image d(hr.h(), hr.w());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = hr[i] - sr[i];
  return d;
}

// Rounding noise of a DFT coefficient is bounded by a small multiple of
// eps * log2(n) * ||d||_1; anything under that is a structural zero.
double zero_threshold(const Image& d) {
  double l1 = 0;
  for (double v : d.pixels()) l1 += std::abs(v);
  const double n = static_cast<double>(d.size());
  return 16.0 * std::numeric_limits<double>::epsilon() * (std::log2(n) + 1.0) * l1;
}

inline double sign_dz(double v, double tau) {
  if (v > tau) return 1.0;
  if (v < -tau) return -1.0;
  return 0.0;
}

Image fd_spectral_grad(const Image& d, double scale) {
  const HalfSpectrum delta = rfft2(d);
  const double tau = zero_threshold(d);
  HalfSpectrum cot(delta.h, delta.w);
  for (std::size_t i = 0; i < delta.coef.size(); ++i)
    cot.coef[i] = {-scale * sign_dz(delta.coef[i].real(), tau), -scale * sign_dz(delta.coef[i].imag(), tau)};
  return adjoint_rfft2(cot, d.h(), d.w());
}

}  // namespace

double rec_loss(const Image& sr, const Image& hr) {
  require_same_shape(sr, hr, "rec_loss");
  require(!sr.empty(), "rec_loss: empty image");
  double acc = 0;
  for (std::size_t i = 0; i < sr.size(); ++i) acc += std::abs(sr[i] - hr[i]);
  return acc / static_cast<double>(sr.size());
}

Image rec_loss_grad(const Image& sr, const Image& hr) {
  require_same_shape(sr, hr, "rec_loss_grad");
  Image g(sr.h(), sr.w());
  const double inv = 1.0 / static_cast<double>(sr.size());
  for (std::size_t i = 0; i < sr.size(); ++i) {
    const double d = sr[i] - hr[i];
    g[i] = d > 0 ? inv : (d < 0 ? -inv : 0.0);
  }
  return g;
}

double fd_loss(const Image& sr, const Image& hr) {
  require_same_shape(sr, hr, "fd_loss");
  const HalfSpectrum delta = rfft2(difference(hr, sr));
  double acc = 0;
  for (const cplx& c : delta.coef) acc += std::abs(c.real()) + std::abs(c.imag());
  return acc / (static_cast<double>(sr.c()) * sr.h() * sr.w());
}

Image fd_loss_grad(const Image& sr, const Image& hr) {
  require_same_shape(sr, hr, "fd_loss_grad");
  const double scale = 1.0 / (static_cast<double>(sr.c()) * sr.h() * sr.w());
  return fd_spectral_grad(difference(hr, sr), scale);
}

LossReport total_loss(const Image& sr, const Image& hr, const LossWeights& weights) {
  weights.validate();
  LossReport r;
  r.rec = rec_loss(sr, hr);
  r.fd = fd_loss(sr, hr);
  r.total = weights.lambda_rec * r.rec + weights.lambda_fd * r.fd;
  return r;
}

Image total_loss_grad(const Image& sr, const Image& hr, const LossWeights& weights, LossReport* report) {
  if (report) *report = total_loss(sr, hr, weights);
  weights.validate();
  Image g = rec_loss_grad(sr, hr);
  for (double& v : g.pixels()) v *= weights.lambda_rec;
  if (weights.lambda_fd > 0) {
    const Image gf = fd_loss_grad(sr, hr);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += weights.lambda_fd * gf[i];
  }
  return g;
}

}  // namespace xsr
