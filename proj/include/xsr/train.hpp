#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xsr/dataset.hpp"
#include "xsr/loss.hpp"
#include "xsr/metrics.hpp"
#include "xsr/network.hpp"

namespace xsr {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 4;
  int scale = 4;
  int epochs = 20;
  std::uint64_t seed = 0;
  LossWeights loss;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Side of the random square window cut from each patch per step; 0 trains
  // on whole patches.
  int crop = 48;
  // Samples of a batch run on separate threads; results are unchanged.
  bool parallel = false;
  // Decay of the weight average that is validated and returned each epoch;
  // 0 uses the raw optimiser iterate.
  double ema_decay = 0.99;

  void validate() const;
};

/// Bias-corrected exponential moving average of weights: after t updates
/// value() = sum_k (1 - d) d^(t-k) w_k / (1 - d^t).
class WeightAverage {
 public:
  explicit WeightAverage(double decay);
  void update(const Weights<float>& w);
  Weights<float> value() const;
  long count() const { return t_; }

 private:
  double decay_;
  long t_ = 0;
  double scale_ = 1.0;  // d^t
  std::vector<double> sum_;
};

struct StepRecord {
  long step = 0;
  LossReport loss;
};

struct EpochRecord {
  int epoch = 0;
  double val_psnr = 0.0;
  double val_ssim = 0.0;
  double val_fd = 0.0;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
};

struct TrainResult {
  Weights<float> weights;  // weights after the epoch with the best validation PSNR
  TrainHistory history;
  MetricsSummary val_bicubic;
};

/// Validation = the last max(1, n/10) pairs. With a single pair it doubles
/// as the training pair.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};
Split split_indices(std::size_t n);

/// bicubic_resample of lr to the hr shape.
Image upsample_input(const SamplePair& p);

TrainResult train(std::span<const SamplePair> pairs, const TrainConfig& cfg);
/// As above, starting from the given weights instead of he_normal(cfg.seed).
TrainResult train(std::span<const SamplePair> pairs, const TrainConfig& cfg, const Weights<float>& init);

struct EvalReport {
  MetricsSummary model;
  MetricsSummary bicubic;
};

/// SR = clamp01(forward(w, upsample_input(pair))), averaged over the set.
EvalReport evaluate(const Weights<float>& w, std::span<const SamplePair> pairs);
MetricsSummary evaluate_bicubic(std::span<const SamplePair> pairs);
Image super_resolve(const Weights<float>& w, const Image& lr, int scale = 4);

/// step<TAB>n<TAB>rec<TAB>fd<TAB>total and epoch<TAB>n<TAB>psnr<TAB>ssim<TAB>fd lines.
void write_history(const TrainHistory& h, const std::filesystem::path& path);
std::string format_history(const TrainHistory& h);

/// "rec-only" when lambda_fd is 0, otherwise "rec+fd".
std::string loss_label(const LossWeights& w);

struct CheckpointMeta {
  LossWeights loss;
  std::string label;
  std::uint64_t seed = 0;
  int epochs = 0;
};
std::filesystem::path meta_path(const std::filesystem::path& checkpoint);
void write_meta(const CheckpointMeta& m, const std::filesystem::path& checkpoint);
/// Missing sidecar yields label "unknown".
CheckpointMeta read_meta(const std::filesystem::path& checkpoint);

/// `method psnr ssim fd n` row.
std::string report_line(const std::string& method, const MetricsSummary& m);

}  // namespace xsr
