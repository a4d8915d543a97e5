#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace xsr {

using cplx = std::complex<double>;

/// Unnormalised 1-D complex DFT of fixed length. Mixed-radix Cooley-Tukey for
/// lengths whose prime factors are all <= 31, Bluestein's chirp-z otherwise.
/// A plan is immutable after construction and may be shared across threads;
/// each call needs caller-provided scratch of scratch_size() elements.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);
  ~FftPlan();
  FftPlan(FftPlan&&) noexcept;
  FftPlan& operator=(FftPlan&&) noexcept;

  std::size_t size() const { return n_; }
  std::size_t scratch_size() const;

  // X[k] = sum_j x[j] exp(-2 pi i jk/n)
  void forward(std::span<cplx> data, std::span<cplx> scratch) const;
  // x[j] = sum_k X[k] exp(+2 pi i jk/n), no 1/n factor
  void inverse(std::span<cplx> data, std::span<cplx> scratch) const;

  void forward(std::span<cplx> data) const;
  void inverse(std::span<cplx> data) const;

 private:
  struct Stage {
    std::size_t radix;
    std::size_t m;  // sub-transform length after this stage
  };
  void transform(std::span<cplx> data, std::span<cplx> scratch, bool inv) const;
  void mixed_radix(cplx* out, const cplx* in, std::size_t fstride, std::size_t stage, const cplx* tw) const;

  std::size_t n_ = 0;
  std::vector<Stage> stages_;
  std::vector<cplx> tw_fwd_, tw_inv_;

  // Bluestein state
  struct Chirp;
  std::unique_ptr<Chirp> chirp_;
};

}  // namespace xsr
