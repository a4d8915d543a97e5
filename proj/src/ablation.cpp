#include "xsr/ablation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "xsr/error.hpp"
#include "xsr/spectrum.hpp"

namespace xsr {

std::vector<AblationArm> ablation_arms() {
  return {{"A", {1.0, 0.0}}, {"B", {1.01, 0.0}}, {"C", {1.0, 0.01}}};
}

double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

std::string g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f) throw DataError("write failed: " + path.string());
}

AblationRow row_of(const std::string& name, const LossWeights& loss, const std::vector<MetricsSummary>& ms) {
  std::vector<double> p, s, f;
  for (const MetricsSummary& m : ms) {
    p.push_back(m.psnr_mean);
    s.push_back(m.ssim_mean);
    f.push_back(m.fd_mean);
  }
  return AblationRow{name, loss, median(p), median(s), median(f)};
}

}  // namespace

AblationReport run_ablation(std::span<const SamplePair> train_pairs, std::span<const SamplePair> test,
                            const AblationOptions& opt) {
  if (train_pairs.empty()) throw DataError("ablation: empty training set");
  if (test.empty()) throw DataError("ablation: empty test set");
  require(!opt.seeds.empty(), "ablation: at least one seed required");
  require(opt.spectrum_view < test.size(), "ablation: spectrum view index out of range");
  if (!opt.out.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(opt.out, ec);
    if (ec) throw DataError("cannot create " + opt.out.string() + ": " + ec.message());
  }

  AblationReport rep;
  const std::vector<AblationArm> arms = ablation_arms();
  std::vector<std::vector<MetricsSummary>> per_arm(arms.size());
  std::vector<MetricsSummary> bicubic;
  const SamplePair& shown = test[opt.spectrum_view];

  for (std::size_t si = 0; si < opt.seeds.size(); ++si) {
    const std::uint64_t seed = opt.seeds[si];
    const Weights<float> init = Weights<float>::he_normal(seed);
    for (std::size_t a = 0; a < arms.size(); ++a) {
      TrainConfig cfg = opt.base;
      cfg.seed = seed;
      cfg.loss = arms[a].loss;
      const TrainResult tr = train(train_pairs, cfg, init);
      AblationRun run;
      run.arm = arms[a].name;
      run.seed = seed;
      run.eval = evaluate(tr.weights, test);
      run.first_step = tr.history.steps.front().loss;
      run.best_epoch = tr.history.best_epoch;
      run.epochs = tr.history.epochs;
      run.val_bicubic_psnr = tr.val_bicubic.psnr_mean;
      run.steps_per_epoch = static_cast<long>(tr.history.steps.size() / tr.history.epochs.size());
      per_arm[a].push_back(run.eval.model);
      if (a == 0) bicubic.push_back(run.eval.bicubic);
      if (si == 0 && !opt.out.empty())
        write_png8(log_magnitude(super_resolve(tr.weights, shown.lr, cfg.scale)),
                   opt.out / ("spectrum_" + arms[a].name + ".png"));
      rep.runs.push_back(run);
    }
  }
  for (std::size_t a = 0; a < arms.size(); ++a) rep.rows.push_back(row_of(arms[a].name, arms[a].loss, per_arm[a]));
  rep.bicubic = row_of("bicubic", LossWeights{0.0, 0.0}, bicubic);

  if (!opt.out.empty()) {
    write_text(opt.out / "ablation.tsv", format_ablation(rep));
    write_text(opt.out / "baseline.tsv", "method\tpsnr\tssim\tfd\n" + rep.bicubic.arm + "\t" + g9(rep.bicubic.psnr) +
                                             "\t" + g9(rep.bicubic.ssim) + "\t" + g9(rep.bicubic.fd) + "\n");
    std::string runs = "config\tseed\tpsnr\tssim\tfd\tbest_epoch\tstep1_rec\tstep1_fd\tstep1_total\n";
    for (const AblationRun& r : rep.runs)
      runs += r.arm + "\t" + std::to_string(r.seed) + "\t" + g9(r.eval.model.psnr_mean) + "\t" +
              g9(r.eval.model.ssim_mean) + "\t" + g9(r.eval.model.fd_mean) + "\t" + std::to_string(r.best_epoch) +
              "\t" + g9(r.first_step.rec) + "\t" + g9(r.first_step.fd) + "\t" + g9(r.first_step.total) + "\n";
    write_text(opt.out / "runs.tsv", runs);
    write_png8(log_magnitude(shown.hr), opt.out / "spectrum_hr.png");
    write_png8(log_magnitude(clamp01(upsample_input(shown))), opt.out / "spectrum_bicubic.png");
  }
  return rep;
}

std::string format_ablation(const AblationReport& r) {
  std::string out = "config\tlambda_rec\tlambda_fd\tpsnr\tssim\tfd\n";
  for (const AblationRow& row : r.rows)
    out += row.arm + "\t" + g9(row.loss.lambda_rec) + "\t" + g9(row.loss.lambda_fd) + "\t" + g9(row.psnr) + "\t" +
           g9(row.ssim) + "\t" + g9(row.fd) + "\n";
  return out;
}

}  // namespace xsr
