#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "xsr/error.hpp"
#include "xsr/network.hpp"

using namespace xsr;
namespace fs = std::filesystem;

namespace {

std::vector<Sample> samples_of(const gradcheck::Batch& b) {
  std::vector<Sample> s;
  for (std::size_t i = 0; i < b.inputs.size(); ++i) s.push_back({&b.inputs[i], &b.targets[i]});
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), {});
}

void spill(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f << s;
}

}  // namespace

TEST(Network, ParameterCount) {
  EXPECT_EQ(NetworkConfig::parameter_count(), 64u * 81 + 64 + 32u * 64 * 25 + 32 + 32u * 25 + 1);
  EXPECT_EQ(Weights<float>().size(), NetworkConfig::parameter_count());
}

TEST(Network, ZeroWeightsGiveZeroOutput) {
  const Image out = forward(Weights<double>::zeros(), oracle::random_image(10, 13, 1));
  ASSERT_EQ(out.h(), 10);
  ASSERT_EQ(out.w(), 13);
  for (double v : out.pixels()) EXPECT_EQ(v, 0.0);
}

TEST(Network, IdentityWeightsPassInputThrough) {
  const Image in = oracle::random_image(17, 11, 2);
  EXPECT_EQ(forward(Weights<double>::identity(), in), in);
  const Image outf = forward(Weights<float>::identity(), in);
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_NEAR(outf[i], in[i], 1e-7);
}

TEST(Network, ForwardMatchesNestedLoopOracle) {
  const Weights<double> w = gradcheck::random_weights(3);
  for (auto [h, w_] : {std::pair{12, 12}, {7, 15}, {1, 9}}) {
    const Image in = oracle::random_image(h, w_, 4);
    const Image out = forward(w, in), ref = oracle::forward(w, in);
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_NEAR(out[i], ref[i], 1e-10) << h << "x" << w_;
  }
}

TEST(Network, ForwardOnWideImagesMatchesOracle) {
  // Wider than one internal column block.
  const Weights<double> w = gradcheck::random_weights(5);
  const Image in = oracle::random_image(40, 120, 6);
  const Image out = forward(w, in), ref = oracle::forward(w, in);
  for (std::size_t i = 0; i < out.size(); ++i) ASSERT_NEAR(out[i], ref[i], 1e-10);
}

TEST(Network, FloatForwardTracksDouble) {
  const Weights<double> w = gradcheck::random_weights(7);
  const Image in = oracle::random_image(20, 20, 8);
  const Image d = forward(w, in), f = forward(w.cast<float>(), in);
  for (std::size_t i = 0; i < d.size(); ++i) ASSERT_NEAR(f[i], d[i], 1e-4 * std::max(1.0, std::abs(d[i])));
}

TEST(Network, TranslationEquivariantAwayFromBorders) {
  const Weights<double> w = gradcheck::random_weights(9);
  const int n = 40, s = 2;
  const Image big = oracle::random_image(n + s, n + s, 10);
  const Image a = crop(big, 0, 0, n, n), b = crop(big, s, s, n, n);
  const Image fa = forward(w, a), fb = forward(w, b);
  // Receptive field radius 4 + 2 + 2 = 8.
  for (int y = 8 + s; y < n - 8; ++y)
    for (int x = 8 + s; x < n - 8; ++x) ASSERT_NEAR(fa.at(y, x), fb.at(y - s, x - s), 1e-10);
}

TEST(Network, PerfectOutputGivesZeroGradients) {
  const Weights<double> w = gradcheck::random_weights(11);
  gradcheck::Batch b = gradcheck::random_batch(2, 8, 8, 12);
  for (std::size_t i = 0; i < b.inputs.size(); ++i) b.targets[i] = forward(w, b.inputs[i]);
  const auto s = samples_of(b);
  const Gradients<double> g = backward(w, std::span<const Sample>(s), LossWeights{1.0, 0.0});
  for (double v : g.grads.params()) ASSERT_EQ(v, 0.0);
  EXPECT_EQ(g.report.total, 0.0);
}

TEST(Network, GradientCheckDouble) {
  const Weights<double> w = gradcheck::random_weights(13);
  const gradcheck::Batch b = gradcheck::random_batch(2, 8, 8, 14);
  for (double lfd : {0.0, 0.01}) {
    const gradcheck::Result r = gradcheck::check_network(w, b, LossWeights{1.0, lfd}, 1e-5);
    EXPECT_LT(r.max_rel, 1e-6) << "lambda_fd " << lfd;
    EXPECT_LE(r.skipped, NetworkConfig::parameter_count() / 100) << "lambda_fd " << lfd;
    EXPECT_EQ(r.checked + r.skipped, NetworkConfig::parameter_count());
  }
}

TEST(Network, SinglePrecisionGradientsTrackDouble) {
  const Weights<double> wd = gradcheck::random_weights(15);
  const Weights<float> wf = wd.cast<float>();
  const gradcheck::Batch b = gradcheck::random_batch(2, 8, 8, 16);
  const auto s = samples_of(b);
  const LossWeights lw{1.0, 0.01};
  const Gradients<double> gd = backward(wf.cast<double>(), std::span<const Sample>(s), lw);
  const Gradients<float> gf = backward(wf, std::span<const Sample>(s), lw);
  double gmax = 0;
  for (double v : gd.grads.params()) gmax = std::max(gmax, std::abs(v));
  std::size_t off = 0;
  for (std::size_t i = 0; i < gd.grads.size(); ++i) {
    const double a = gd.grads.params()[i], f = gf.grads.params()[i];
    off += gradcheck::rel_err(f, a, 1e-3 * gmax) > 1e-3;
  }
  // Float rounding may flip a few residual signs; nearly all entries agree.
  EXPECT_LE(off, gd.grads.size() / 100);
}

TEST(Network, BackpropIsLinearInTheCotangent) {
  const Weights<double> w = gradcheck::random_weights(17);
  const gradcheck::Batch b = gradcheck::random_batch(2, 8, 8, 18);
  const auto s = samples_of(b);
  const auto both = backward(w, std::span<const Sample>(s), LossWeights{1.0, 0.01});
  const auto rec = backward(w, std::span<const Sample>(s), LossWeights{1.0, 0.0});
  const auto fd = backward(w, std::span<const Sample>(s), LossWeights{0.0, 1.0});
  for (std::size_t i = 0; i < both.grads.size(); ++i)
    ASSERT_NEAR(both.grads.params()[i], rec.grads.params()[i] + 0.01 * fd.grads.params()[i], 1e-10);
}

TEST(Network, ParallelBackwardIsBitwiseSerial) {
  const Weights<float> w = Weights<float>::he_normal(19);
  const gradcheck::Batch b = gradcheck::random_batch(5, 12, 10, 20);
  const auto s = samples_of(b);
  const auto serial = backward(w, std::span<const Sample>(s), LossWeights{}, false);
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    const auto par = backward(w, std::span<const Sample>(s), LossWeights{}, true);
    EXPECT_TRUE(par.grads == serial.grads) << threads;
    EXPECT_EQ(par.report.total, serial.report.total);
  }
  omp_set_num_threads(omp_get_num_procs());
}

TEST(Network, BackwardShapeErrors) {
  const Weights<double> w;
  const Image a(8, 8), b(8, 9);
  std::vector<Sample> s{{&a, &b}};
  EXPECT_THROW(backward(w, std::span<const Sample>(s), LossWeights{}), std::invalid_argument);
  std::vector<Sample> empty;
  EXPECT_THROW(backward(w, std::span<const Sample>(empty), LossWeights{}), std::invalid_argument);
}

TEST(Network, HeInitStatistics) {
  const Weights<double> w = Weights<double>::he_normal(21);
  EXPECT_EQ(w, Weights<double>::he_normal(21));
  for (int l = 0; l < NetworkConfig::kDepth; ++l) {
    double s2 = 0;
    for (double v : w.kernel(l)) s2 += v * v;
    const double var = s2 / w.kernel(l).size();
    const double expect = 2.0 / NetworkConfig::layers[l].fan_in();
    EXPECT_NEAR(var / expect, 1.0, 0.2) << l;
    for (double v : w.bias(l)) EXPECT_EQ(v, 0.0);
  }
}

TEST(Adam, ZeroGradientsLeaveWeightsUnchanged) {
  Weights<float> w = Weights<float>::he_normal(22);
  const Weights<float> before = w;
  AdamState<float> st;
  for (int i = 0; i < 5; ++i) adam_step(w, Weights<float>::zeros(), st, AdamParams{});
  EXPECT_TRUE(w == before);
  EXPECT_EQ(st.step, 5);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Weights<double> w;
  Weights<double> g;
  g.params()[0] = 0.37;
  g.params()[1] = -4.0;
  AdamState<double> st;
  adam_step(w, g, st, AdamParams{});
  EXPECT_NEAR(w.params()[0], -1e-4, 1e-9);
  EXPECT_NEAR(w.params()[1], 1e-4, 1e-9);
  EXPECT_EQ(w.params()[2], 0.0);
}

TEST(Adam, DeterministicAcrossRuns) {
  auto run = [] {
    Weights<float> w = Weights<float>::he_normal(23);
    AdamState<float> st;
    const gradcheck::Batch b = gradcheck::random_batch(2, 10, 10, 24);
    const auto s = samples_of(b);
    for (int i = 0; i < 3; ++i) adam_step(w, backward(w, std::span<const Sample>(s), LossWeights{}).grads, st, AdamParams{});
    return w;
  };
  EXPECT_TRUE(run() == run());
}

TEST(Adam, NonFiniteGradientIsNumericError) {
  Weights<float> w;
  Weights<float> g;
  g.params()[10] = std::numeric_limits<float>::quiet_NaN();
  AdamState<float> st;
  EXPECT_THROW(adam_step(w, g, st, AdamParams{}), NumericError);
}

TEST(Checkpoint, RoundTripAndLayout) {
  const fs::path p = fs::temp_directory_path() / "xsr_test_ckpt.bin";
  const Weights<float> w = Weights<float>::he_normal(25);
  save_checkpoint(w, p);
  EXPECT_TRUE(load_checkpoint(p) == w);
  const std::string bytes = slurp(p);
  ASSERT_EQ(bytes.substr(0, 5), "XSRW1");
  std::uint32_t dims[4];
  std::memcpy(dims, bytes.data() + 5, 16);
  EXPECT_EQ(dims[0], 64u);
  EXPECT_EQ(dims[1], 1u);
  EXPECT_EQ(dims[2], 9u);
  EXPECT_EQ(dims[3], 9u);
  float first;
  std::memcpy(&first, bytes.data() + 21, 4);
  EXPECT_EQ(first, w.kernel(0)[0]);
  std::size_t expect = 5;
  for (const auto& l : NetworkConfig::layers) expect += 16 + 4 * l.kernel_size() + 4 + 4 * l.cout;
  EXPECT_EQ(bytes.size(), expect);
}

TEST(Checkpoint, CorruptFilesAreDataErrors) {
  const fs::path p = fs::temp_directory_path() / "xsr_test_ckpt_bad.bin";
  save_checkpoint(Weights<float>::he_normal(26), p);
  const std::string good = slurp(p);
  spill(p, "XSRW2" + good.substr(5));
  EXPECT_THROW(load_checkpoint(p), DataError);
  std::string wrong = good;
  wrong[5] = 63;  // cout 63
  spill(p, wrong);
  EXPECT_THROW(load_checkpoint(p), DataError);
  spill(p, good + "x");
  EXPECT_THROW(load_checkpoint(p), DataError);
  spill(p, good.substr(0, good.size() - 3));
  EXPECT_THROW(load_checkpoint(p), DataError);
  EXPECT_THROW(load_checkpoint(fs::temp_directory_path() / "xsr_no_such_ckpt"), DataError);
}
