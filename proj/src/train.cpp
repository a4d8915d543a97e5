#include "xsr/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "xsr/bicubic.hpp"
#include "xsr/error.hpp"

namespace xsr {

void TrainConfig::validate() const {
  require(learning_rate > 0 && std::isfinite(learning_rate), "train: learning_rate must be > 0");
  require(batch_size >= 1, "train: batch_size must be >= 1");
  require(scale == 4, "train: scale is fixed at 4");
  require(epochs >= 1, "train: epochs must be >= 1");
  require(crop >= 0, "train: crop must be >= 0");
  require(ema_decay >= 0 && ema_decay < 1, "train: ema_decay must be in [0, 1)");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "train: Adam betas must lie in [0, 1)");
  require(eps > 0, "train: eps must be > 0");
  loss.validate();
}

Split split_indices(std::size_t n) {
  Split s;
  if (n == 0) return s;
  if (n == 1) {
    s.train = s.val = {0};
    return s;
  }
  const std::size_t nval = std::max<std::size_t>(1, n / 10);
  for (std::size_t i = 0; i < n; ++i) (i < n - nval ? s.train : s.val).push_back(i);
  return s;
}

Image upsample_input(const SamplePair& p) { return bicubic_resample(p.lr, p.hr.h(), p.hr.w()); }

Image super_resolve(const Weights<float>& w, const Image& lr, int scale) {
  return clamp01(forward(w, bicubic_resample(lr, lr.h() * scale, lr.w() * scale)));
}

namespace {

struct PairMetrics {
  double psnr = 0, ssim = 0, fd = 0;
};

PairMetrics measure(const Image& sr, const Image& hr) {
  PairMetrics m;
  m.psnr = psnr(sr, hr);
  m.ssim = std::min(sr.h(), sr.w()) >= kSsimWindow ? ssim(sr, hr) : std::numeric_limits<double>::quiet_NaN();
  m.fd = fd_loss(sr, hr);
  return m;
}

MetricsSummary summarize(const std::vector<PairMetrics>& v) {
  MetricsSummary s;
  for (const PairMetrics& m : v) {
    s.psnr_mean += m.psnr;
    s.ssim_mean += m.ssim;
    s.fd_mean += m.fd;
  }
  s.n = static_cast<int>(v.size());
  if (s.n > 0) {
    s.psnr_mean /= s.n;
    s.ssim_mean /= s.n;
    s.fd_mean /= s.n;
  }
  return s;
}

// Metrics of the clamped network output (or of the bicubic input when w is
// null) over the chosen pairs, computed in parallel and summed in order.
MetricsSummary score(const Weights<float>* w, std::span<const SamplePair> pairs, std::span<const std::size_t> idx,
                     std::span<const Image> inputs) {
  std::vector<PairMetrics> per(idx.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const SamplePair& p = pairs[idx[i]];
    const Image& in = inputs.empty() ? upsample_input(p) : inputs[idx[i]];
    per[i] = measure(w ? clamp01(forward(*w, in)) : clamp01(in), p.hr);
  }
  return summarize(per);
}

MetricsSummary score(const Weights<float>* w, std::span<const SamplePair> pairs) {
  std::vector<std::size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<PairMetrics> per(pairs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Image in = upsample_input(pairs[i]);
    per[i] = measure(w ? clamp01(forward(*w, in)) : clamp01(in), pairs[i].hr);
  }
  return summarize(per);
}

void check_pairs(std::span<const SamplePair> pairs, int scale) {
  for (const SamplePair& p : pairs) {
    if (p.hr.empty() || p.lr.h() * scale != p.hr.h() || p.lr.w() * scale != p.hr.w())
      throw DataError("pair shapes do not match the x" + std::to_string(scale) + " scale");
  }
}

}  // namespace

WeightAverage::WeightAverage(double decay) : decay_(decay), sum_(NetworkConfig::parameter_count(), 0.0) {
  if (!(decay >= 0 && decay < 1)) throw std::invalid_argument("WeightAverage: decay must be in [0, 1)");
}

void WeightAverage::update(const Weights<float>& w) {
  const auto p = w.params();
  for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] = decay_ * sum_[i] + (1.0 - decay_) * p[i];
  scale_ *= decay_;
  ++t_;
}

Weights<float> WeightAverage::value() const {
  if (t_ == 0) throw std::logic_error("WeightAverage: no updates");
  Weights<float> out;
  const double c = 1.0 / (1.0 - scale_);
  auto p = out.params();
  for (std::size_t i = 0; i < sum_.size(); ++i) p[i] = static_cast<float>(sum_[i] * c);
  return out;
}

TrainResult train(std::span<const SamplePair> pairs, const TrainConfig& cfg) {
  return train(pairs, cfg, Weights<float>::he_normal(cfg.seed));
}

TrainResult train(std::span<const SamplePair> pairs, const TrainConfig& cfg, const Weights<float>& init) {
  cfg.validate();
  if (pairs.empty()) throw DataError("train: empty dataset");
  check_pairs(pairs, cfg.scale);

  const Split split = split_indices(pairs.size());
  std::vector<Image> inputs(pairs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < pairs.size(); ++i) inputs[i] = upsample_input(pairs[i]);

  TrainResult res;
  res.val_bicubic = score(nullptr, pairs, split.val, inputs);
  Weights<float> w = init;
  AdamState<float> adam;
  WeightAverage avg(cfg.ema_decay);
  const AdamParams ap{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps};

  std::mt19937_64 rng(cfg.seed ^ 0x6f72646572ULL);
  std::vector<std::size_t> order = split.train;
  double best_psnr = -std::numeric_limits<double>::infinity();
  long step = 0;
  std::vector<Image> bin, btgt;
  std::vector<Sample> batch;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t nb = std::min<std::size_t>(cfg.batch_size, order.size() - b0);
      bin.assign(nb, Image());
      btgt.assign(nb, Image());
      batch.clear();
      for (std::size_t j = 0; j < nb; ++j) {
        const std::size_t i = order[b0 + j];
        const Image& in = inputs[i];
        const Image& hr = pairs[i].hr;
        if (cfg.crop > 0 && (cfg.crop < hr.h() || cfg.crop < hr.w())) {
          const int ch = std::min(cfg.crop, hr.h()), cw = std::min(cfg.crop, hr.w());
          std::uniform_int_distribution<int> dy(0, hr.h() - ch), dx(0, hr.w() - cw);
          const int y = dy(rng), x = dx(rng);
          bin[j] = crop(in, y, x, ch, cw);
          btgt[j] = crop(hr, y, x, ch, cw);
        } else {
          bin[j] = in;
          btgt[j] = hr;
        }
      }
      for (std::size_t j = 0; j < nb; ++j) batch.push_back(Sample{&bin[j], &btgt[j]});

      const Gradients<float> g = backward(w, std::span<const Sample>(batch), cfg.loss, cfg.parallel);
      ++step;
      if (!std::isfinite(g.report.total)) throw NumericError("train: loss diverged at step " + std::to_string(step));
      adam_step(w, g.grads, adam, ap);
      avg.update(w);
      res.history.steps.push_back(StepRecord{step, g.report});
    }

    Weights<float> snap = avg.value();
    const MetricsSummary val = score(&snap, pairs, split.val, inputs);
    res.history.epochs.push_back(EpochRecord{epoch, val.psnr_mean, val.ssim_mean, val.fd_mean});
    if (val.psnr_mean > best_psnr) {
      best_psnr = val.psnr_mean;
      res.weights = std::move(snap);
      res.history.best_epoch = epoch;
    }
  }
  return res;
}

EvalReport evaluate(const Weights<float>& w, std::span<const SamplePair> pairs) {
  if (pairs.empty()) throw DataError("evaluate: empty test set");
  check_pairs(pairs, 4);
  return EvalReport{score(&w, pairs), score(nullptr, pairs)};
}

MetricsSummary evaluate_bicubic(std::span<const SamplePair> pairs) {
  if (pairs.empty()) throw DataError("evaluate: empty test set");
  check_pairs(pairs, 4);
  return score(nullptr, pairs);
}

// ---------------------------------------------------------------- files

namespace {

std::string g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string format_history(const TrainHistory& h) {
  std::string out;
  std::size_t si = 0;
  const std::size_t per_epoch = h.epochs.empty() ? h.steps.size() : h.steps.size() / h.epochs.size();
  for (const EpochRecord& e : h.epochs) {
    for (std::size_t k = 0; k < per_epoch && si < h.steps.size(); ++k, ++si) {
      const StepRecord& s = h.steps[si];
      out += "step\t" + std::to_string(s.step) + "\t" + g9(s.loss.rec) + "\t" + g9(s.loss.fd) + "\t" +
             g9(s.loss.total) + "\n";
    }
    out += "epoch\t" + std::to_string(e.epoch) + "\t" + g9(e.val_psnr) + "\t" + g9(e.val_ssim) + "\t" +
           g9(e.val_fd) + "\n";
  }
  for (; si < h.steps.size(); ++si) {
    const StepRecord& s = h.steps[si];
    out += "step\t" + std::to_string(s.step) + "\t" + g9(s.loss.rec) + "\t" + g9(s.loss.fd) + "\t" +
           g9(s.loss.total) + "\n";
  }
  return out;
}

void write_history(const TrainHistory& h, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << format_history(h);
  if (!f) throw DataError("write failed: " + path.string());
}

std::string loss_label(const LossWeights& w) { return w.lambda_fd == 0.0 ? "rec-only" : "rec+fd"; }

std::filesystem::path meta_path(const std::filesystem::path& checkpoint) {
  std::filesystem::path p = checkpoint;
  p += ".meta";
  return p;
}

void write_meta(const CheckpointMeta& m, const std::filesystem::path& checkpoint) {
  const auto path = meta_path(checkpoint);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << "label = " << m.label << "\n"
    << "lambda_rec = " << g9(m.loss.lambda_rec) << "\n"
    << "lambda_fd = " << g9(m.loss.lambda_fd) << "\n"
    << "seed = " << m.seed << "\n"
    << "epochs = " << m.epochs << "\n";
}

CheckpointMeta read_meta(const std::filesystem::path& checkpoint) {
  CheckpointMeta m;
  m.label = "unknown";
  std::ifstream f(meta_path(checkpoint));
  if (!f) return m;
  std::string line;
  while (std::getline(f, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    try {
      if (key == "label") m.label = val;
      else if (key == "lambda_rec") m.loss.lambda_rec = std::stod(val);
      else if (key == "lambda_fd") m.loss.lambda_fd = std::stod(val);
      else if (key == "seed") m.seed = std::stoull(val);
      else if (key == "epochs") m.epochs = std::stoi(val);
    } catch (const std::exception&) {
      throw DataError("bad value for '" + key + "' in " + meta_path(checkpoint).string());
    }
  }
  return m;
}

std::string report_line(const std::string& method, const MetricsSummary& m) {
  return method + "\t" + g9(m.psnr_mean) + "\t" + g9(m.ssim_mean) + "\t" + g9(m.fd_mean) + "\t" + std::to_string(m.n);
}

}  // namespace xsr
