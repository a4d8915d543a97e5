#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xsr/train.hpp"

namespace xsr {

struct AblationArm {
  std::string name;  // "A", "B", "C"
  LossWeights loss;
};

/// A: rec 1.0; B: rec 1.01; C: rec 1.0 + fd 0.01.
std::vector<AblationArm> ablation_arms();

struct AblationRun {
  std::string arm;
  std::uint64_t seed = 0;
  EvalReport eval;
  LossReport first_step;  // loss at the shared initial weights
  int best_epoch = 0;
  std::vector<EpochRecord> epochs;  // validation metrics per epoch
  double val_bicubic_psnr = 0.0;
  long steps_per_epoch = 0;
};

struct AblationRow {
  std::string arm;
  LossWeights loss;
  double psnr = 0.0;  // medians over seeds
  double ssim = 0.0;
  double fd = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  AblationRow bicubic;
  std::vector<AblationRun> runs;
};

double median(std::vector<double> v);

struct AblationOptions {
  TrainConfig base;  // loss weights and seed are overridden per run
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t spectrum_view = 0;  // test pair shown in the spectrum images
  std::filesystem::path out;      // empty: no files
};

/// Trains every arm for every seed with identical data order and initial
/// weights, then evaluates on `test`. Writes ablation.tsv, runs.tsv,
/// baseline.tsv and spectrum_{hr,bicubic,A,B,C}.png (first seed) to out.
AblationReport run_ablation(std::span<const SamplePair> train_pairs, std::span<const SamplePair> test,
                            const AblationOptions& opt);

std::string format_ablation(const AblationReport& r);

}  // namespace xsr
