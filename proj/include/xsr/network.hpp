#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "xsr/image.hpp"
#include "xsr/loss.hpp"

namespace xsr {

struct LayerShape {
  int cout;
  int cin;
  int k;  // square kernel, odd
  bool relu;

  std::size_t kernel_size() const { return static_cast<std::size_t>(cout) * cin * k * k; }
  int fan_in() const { return cin * k * k; }
};

/// 9x9 1->64 ReLU, 5x5 64->32 ReLU, 5x5 32->1 linear, all same-padded.
/// The input is the bicubic-upsampled low-resolution image.
struct NetworkConfig {
  static constexpr int kDepth = 3;
  static constexpr std::array<LayerShape, kDepth> layers{{{64, 1, 9, true}, {32, 64, 5, true}, {1, 32, 5, false}}};
  static std::size_t parameter_count();
};

/// All parameters in one flat buffer: per layer, kernel [cout][cin][ky][kx]
/// followed by bias [cout]. Gradients and optimiser moments share the layout.
template <class T>
class Weights {
 public:
  Weights();

  static Weights zeros() { return Weights(); }
  /// Zero biases, kernels ~ N(0, 2 / fan_in).
  static Weights he_normal(std::uint64_t seed);
  /// Routes the input through channel 0 of every layer unchanged (for x >= 0).
  static Weights identity();

  std::span<T> kernel(int layer);
  std::span<const T> kernel(int layer) const;
  std::span<T> bias(int layer);
  std::span<const T> bias(int layer) const;

  std::span<T> params() { return data_; }
  std::span<const T> params() const { return data_; }
  std::size_t size() const { return data_.size(); }

  bool all_finite() const;

  template <class U>
  Weights<U> cast() const {
    Weights<U> out;
    auto dst = out.params();
    for (std::size_t i = 0; i < data_.size(); ++i) dst[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Weights&, const Weights&) = default;

 private:
  std::vector<T> data_;
};

/// Network output for one image; not clamped.
template <class T>
Image forward(const Weights<T>& w, const Image& input);

/// One training example: network input (bicubic-upsampled LR) and target.
struct Sample {
  const Image* input;
  const Image* target;
};

template <class T>
struct Gradients {
  Weights<T> grads;  // d(mean over batch of total_loss) / d params
  LossReport report;  // batch means
};

/// Backpropagates mean-over-batch total_loss. Samples run in parallel when
/// `parallel` is set; per-sample gradients are summed in batch order, so the
/// result is bitwise independent of the thread count.
template <class T>
Gradients<T> backward(const Weights<T>& w, std::span<const Sample> batch, const LossWeights& loss, bool parallel = true);

struct AdamParams {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct AdamState {
  std::vector<double> m, v;
  long step = 0;
};

/// Bias-corrected Adam update. Throws NumericError on non-finite gradients.
template <class T>
void adam_step(Weights<T>& w, const Weights<T>& grads, AdamState<T>& state, const AdamParams& p);

void save_checkpoint(const Weights<float>& w, const std::filesystem::path& path);
Weights<float> load_checkpoint(const std::filesystem::path& path);

extern template class Weights<float>;
extern template class Weights<double>;

}  // namespace xsr
