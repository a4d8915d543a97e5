#include <gtest/gtest.h>

#include "oracles.hpp"
#include "xsr/bicubic.hpp"

using namespace xsr;

TEST(Bicubic, KernelValues) {
  EXPECT_EQ(cubic_kernel(0.0), 1.0);
  EXPECT_EQ(cubic_kernel(1.0), 0.0);
  EXPECT_EQ(cubic_kernel(2.0), 0.0);
  EXPECT_EQ(cubic_kernel(-2.5), 0.0);
  EXPECT_DOUBLE_EQ(cubic_kernel(0.5), oracle::keys(0.5));
  EXPECT_DOUBLE_EQ(cubic_kernel(-1.5), oracle::keys(1.5));
  EXPECT_DOUBLE_EQ(cubic_kernel(1.5), -0.0625);
}

TEST(Bicubic, ConstantIsPreserved) {
  const Image c(13, 9, 0.37);
  for (auto [h, w] : {std::pair{13, 9}, {52, 36}, {3, 2}, {40, 5}, {1, 1}}) {
    const Image out = bicubic_resample(c, h, w);
    for (double v : out.pixels()) ASSERT_NEAR(v, 0.37, 1e-12);
  }
}

TEST(Bicubic, LinearRampStaysLinearInInterior) {
  Image ramp(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) ramp.at(y, x) = 0.1 + 0.1 * x;
  const Image up = bicubic_resample(ramp, 32, 32);
  // Input sample x sits at output coordinate 4x + 1.5; away from the borders
  // the taps are complete and the ramp is reproduced exactly.
  for (int y = 0; y < 32; ++y)
    for (int x = 8; x < 24; ++x) {
      const double src = (x + 0.5) / 4.0 - 0.5;
      ASSERT_NEAR(up.at(y, x), 0.1 + 0.1 * src, 1e-6) << x;
    }
}

TEST(Bicubic, DownsampleMatchesDirectSum) {
  const Image img = oracle::random_image(8, 8, 5);
  const Image out = bicubic_resample(img, 2, 2);
  const Image ref = oracle::bicubic(img, 2, 2);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], ref[i], 1e-10);
}

TEST(Bicubic, MixedResizesMatchDirectSum) {
  const Image img = oracle::random_image(12, 10, 6);
  for (auto [h, w] : {std::pair{3, 40}, {48, 40}, {7, 5}, {12, 10}}) {
    const Image out = bicubic_resample(img, h, w), ref = oracle::bicubic(img, h, w);
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_NEAR(out[i], ref[i], 1e-10) << h << "x" << w;
  }
}

TEST(Bicubic, OutputClampedToUnitRange) {
  Image step(8, 8, 0.0);
  for (int y = 0; y < 8; ++y)
    for (int x = 4; x < 8; ++x) step.at(y, x) = 1.0;
  const Image up = bicubic_resample(step, 32, 32);
  for (double v : up.pixels()) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(Bicubic, RejectsEmptyTargets) {
  EXPECT_THROW(bicubic_resample(Image(4, 4), 0, 4), std::invalid_argument);
  EXPECT_THROW(bicubic_resample(Image(), 4, 4), std::invalid_argument);
}
