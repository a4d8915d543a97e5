#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "xsr/ablation.hpp"
#include "xsr/bicubic.hpp"
#include "xsr/error.hpp"

using namespace xsr;
namespace fs = std::filesystem;

namespace {

std::vector<SamplePair> pairs_of(int n, int side, std::uint64_t seed) {
  std::vector<SamplePair> v;
  for (int i = 0; i < n; ++i)
    v.push_back(make_pair(bicubic_resample(oracle::random_image(side / 4, side / 4, seed + i, 0.1, 0.9), side, side), 4));
  return v;
}

std::string first_line(const fs::path& p) {
  std::ifstream f(p);
  std::string s;
  std::getline(f, s);
  return s;
}

}  // namespace

TEST(Ablation, ArmsAreTheThreeConfigurations) {
  const auto arms = ablation_arms();
  ASSERT_EQ(arms.size(), 3u);
  EXPECT_EQ(arms[0].name, "A");
  EXPECT_EQ(arms[0].loss.lambda_rec, 1.0);
  EXPECT_EQ(arms[0].loss.lambda_fd, 0.0);
  EXPECT_EQ(arms[1].loss.lambda_rec, 1.01);
  EXPECT_EQ(arms[1].loss.lambda_fd, 0.0);
  EXPECT_EQ(arms[2].loss.lambda_rec, 1.0);
  EXPECT_EQ(arms[2].loss.lambda_fd, 0.01);
}

TEST(Ablation, Median) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0}), 2.5);
  EXPECT_THROW(median({}), std::invalid_argument);
}

TEST(Ablation, TinyRunSharesDataOrderAndInitialWeights) {
  const auto train = pairs_of(6, 16, 1), test = pairs_of(2, 16, 50);
  AblationOptions opt;
  opt.base.epochs = 1;
  opt.base.crop = 8;
  opt.seeds = {0, 1};
  opt.out = fs::temp_directory_path() / "xsr_test_ablation";
  fs::remove_all(opt.out);
  const AblationReport r = run_ablation(std::span<const SamplePair>(train), std::span<const SamplePair>(test), opt);

  ASSERT_EQ(r.rows.size(), 3u);
  ASSERT_EQ(r.runs.size(), 6u);
  for (std::size_t s = 0; s < 2; ++s) {
    const AblationRun &a = r.runs[3 * s], &b = r.runs[3 * s + 1], &c = r.runs[3 * s + 2];
    EXPECT_EQ(a.arm, "A");
    EXPECT_EQ(c.arm, "C");
    // Same weights and batch at step 1: only the loss weights differ.
    EXPECT_EQ(a.first_step.rec, b.first_step.rec);
    EXPECT_EQ(a.first_step.rec, c.first_step.rec);
    EXPECT_EQ(a.first_step.fd, c.first_step.fd);
    EXPECT_NEAR(b.first_step.total, 1.01 * a.first_step.total, 1e-12);
    EXPECT_NEAR(c.first_step.total, a.first_step.rec + 0.01 * a.first_step.fd, 1e-12);
    EXPECT_EQ(a.eval.bicubic.psnr_mean, c.eval.bicubic.psnr_mean);
  }
  EXPECT_NE(r.runs[0].first_step.rec, r.runs[3].first_step.rec);

  std::vector<double> psnr_a{r.runs[0].eval.model.psnr_mean, r.runs[3].eval.model.psnr_mean};
  EXPECT_DOUBLE_EQ(r.rows[0].psnr, median(psnr_a));

  EXPECT_EQ(first_line(opt.out / "ablation.tsv"), "config\tlambda_rec\tlambda_fd\tpsnr\tssim\tfd");
  EXPECT_EQ(first_line(opt.out / "runs.tsv").substr(0, 12), "config\tseed\t");
  for (const char* f : {"baseline.tsv", "spectrum_hr.png", "spectrum_bicubic.png", "spectrum_A.png",
                        "spectrum_B.png", "spectrum_C.png"})
    EXPECT_TRUE(fs::exists(opt.out / f)) << f;
  EXPECT_EQ(format_ablation(r).substr(0, 6), "config");
}

TEST(Ablation, RejectsEmptyInputs) {
  const auto train = pairs_of(2, 16, 1);
  std::vector<SamplePair> none;
  AblationOptions opt;
  EXPECT_THROW(run_ablation(std::span<const SamplePair>(train), std::span<const SamplePair>(none), opt), DataError);
  opt.spectrum_view = 5;
  EXPECT_THROW(run_ablation(std::span<const SamplePair>(train), std::span<const SamplePair>(train), opt),
               std::invalid_argument);
}
