#pragma once

#include "xsr/image.hpp"

namespace xsr {

struct LossWeights {
  double lambda_rec = 1.0;
  double lambda_fd = 0.01;
  // Adversarial and perceptual terms are not part of this system; kept at 0.
  double lambda_adv = 0.0;
  double lambda_per = 0.0;

  void validate() const;
};

struct LossReport {
  double rec = 0.0;
  double fd = 0.0;
  double total = 0.0;
};

/// mean |sr - hr|
double rec_loss(const Image& sr, const Image& hr);
Image rec_loss_grad(const Image& sr, const Image& hr);

/// Frequency-domain L1: sum over the half spectrum of |Re D| + |Im D|, with
/// D = rfft2(hr) - rfft2(sr), divided by C*H*W.
double fd_loss(const Image& sr, const Image& hr);

/// d fd_loss / d sr, using sign(0) = 0. Coefficients whose magnitude is at
/// round-off level relative to the difference image count as zero.
Image fd_loss_grad(const Image& sr, const Image& hr);

LossReport total_loss(const Image& sr, const Image& hr, const LossWeights& weights);

/// Pixel-space cotangent lambda_rec * d rec + lambda_fd * d fd, plus the report.
Image total_loss_grad(const Image& sr, const Image& hr, const LossWeights& weights, LossReport* report = nullptr);

}  // namespace xsr
