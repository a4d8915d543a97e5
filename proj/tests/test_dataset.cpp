#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "xsr/bicubic.hpp"
#include "xsr/dataset.hpp"
#include "xsr/error.hpp"

using namespace xsr;
namespace fs = std::filesystem;

namespace {

DatasetSpec small_spec() {
  DatasetSpec s;
  s.view_size = 32;
  s.patch = 16;
  return s;
}

const CtVolume& small_volume() {
  static const CtVolume v = generate_phantom(head_phantom_spec(0, {32, 32, 32}, {1.0, 1.0, 1.0}));
  return v;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("xsr_test_dataset_" + name);
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), {});
}

}  // namespace

TEST(Poses, TrainGridIsFullCartesianProduct) {
  const DatasetSpec s;
  const auto poses = view_poses(s, ViewMode::train);
  ASSERT_EQ(poses.size(), 225u);
  std::set<std::pair<double, double>> seen;
  for (const ViewPose& p : poses) {
    seen.insert({p.theta_x, p.theta_y});
    EXPECT_EQ(p.det_w, 512);
    EXPECT_EQ(p.det_h, 512);
    EXPECT_EQ(std::fmod(p.theta_x, 24.0), 0.0);
    EXPECT_EQ(std::fmod(p.theta_y, 24.0), 0.0);
    EXPECT_LE(p.theta_x, 336.0);
  }
  EXPECT_EQ(seen.size(), 225u);
  EXPECT_EQ(poses[1].theta_x, 0.0);
  EXPECT_EQ(poses[1].theta_y, 24.0);
}

TEST(Poses, SingleViewGrid) {
  DatasetSpec s;
  s.grid_n = 1;
  const auto poses = view_poses(s, ViewMode::train);
  ASSERT_EQ(poses.size(), 1u);
  EXPECT_EQ(poses[0].theta_x, 0.0);
  EXPECT_EQ(poses[0].theta_y, 0.0);
}

TEST(Poses, TestViewsAreDistinctLatticePointsAndSeeded) {
  DatasetSpec s;
  const auto a = view_poses(s, ViewMode::test);
  ASSERT_EQ(a.size(), 30u);
  std::set<std::pair<double, double>> seen;
  for (const ViewPose& p : a) {
    seen.insert({p.theta_x, p.theta_y});
    EXPECT_EQ(std::fmod(p.theta_x, 20.0), 0.0);
    EXPECT_LT(p.theta_x, 360.0);
    EXPECT_LT(p.theta_y, 360.0);
  }
  EXPECT_EQ(seen.size(), 30u);
  const auto b = view_poses(s, ViewMode::test);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].theta_x, b[i].theta_x);
    EXPECT_EQ(a[i].theta_y, b[i].theta_y);
  }
  s.seed = 1;
  const auto c = view_poses(s, ViewMode::test);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].theta_x != c[i].theta_x || a[i].theta_y != c[i].theta_y;
  EXPECT_TRUE(differs);
  s.test_count = 10000;
  EXPECT_EQ(view_poses(s, ViewMode::test).size(), 18u * 18u);
}

TEST(Poses, SpecValidation) {
  DatasetSpec s;
  s.scale = 2;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = DatasetSpec{};
  s.patches_per_image = 4;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = DatasetSpec{};
  s.patch = 162;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = DatasetSpec{};
  s.grid_n = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Patches, OffsetsAreCornersThenCentre) {
  const auto o = patch_offsets(512, 160);
  EXPECT_EQ(o[0], (std::array<int, 2>{0, 0}));
  EXPECT_EQ(o[1], (std::array<int, 2>{0, 352}));
  EXPECT_EQ(o[2], (std::array<int, 2>{352, 0}));
  EXPECT_EQ(o[3], (std::array<int, 2>{352, 352}));
  EXPECT_EQ(o[4], (std::array<int, 2>{176, 176}));
}

TEST(Patches, CropsReadTheRightPixels) {
  // Coordinate-encoded image: value identifies (y, x).
  Image img(512, 512);
  for (int y = 0; y < 512; ++y)
    for (int x = 0; x < 512; ++x) img.at(y, x) = y * 512.0 + x;
  const DatasetSpec s;
  const auto patches = crop_patches(img, s);
  ASSERT_EQ(patches.size(), 5u);
  const auto o = patch_offsets(512, 160);
  for (int k = 0; k < 5; ++k) {
    ASSERT_EQ(patches[k].h(), 160);
    ASSERT_EQ(patches[k].w(), 160);
    for (int y = 0; y < 160; y += 53)
      for (int x = 0; x < 160; x += 37) EXPECT_EQ(patches[k].at(y, x), (o[k][0] + y) * 512.0 + o[k][1] + x);
  }
  EXPECT_THROW(crop_patches(Image(511, 512), s), std::invalid_argument);
}

TEST(Patches, ConstantViewGivesConstantPairs) {
  const DatasetSpec s;
  const Image view(512, 512, 0.25);
  const auto pairs = make_pairs(crop_patches(view, s), 4);
  ASSERT_EQ(pairs.size(), 5u);
  const double q = std::round(0.25 * 65535) / 65535;
  for (const SamplePair& p : pairs) {
    EXPECT_EQ(p.lr.h(), 40);
    EXPECT_EQ(p.lr.w(), 40);
    for (double v : p.hr.pixels()) ASSERT_EQ(v, q);
    for (double v : p.lr.pixels()) ASSERT_NEAR(v, q, 1e-12);
  }
}

TEST(Patches, LowResIsBicubicOfHighRes) {
  const SamplePair p = make_pair(oracle::random_image(32, 24, 1), 4);
  EXPECT_EQ(p.hr, quantize16(p.hr));
  const Image regenerated = quantize16(bicubic_resample(p.hr, 8, 6));
  EXPECT_EQ(p.lr, regenerated);
  EXPECT_THROW(make_pair(Image(30, 32), 4), std::invalid_argument);
}

TEST(Views, GeneratedViewsMatchDirectRendering) {
  DatasetSpec s = small_spec();
  s.grid_n = 3;
  s.step_deg = 50;
  const OpacityLut lut;
  const auto views = generate_views(small_volume(), lut, s, ViewMode::train);
  ASSERT_EQ(views.size(), 9u);
  for (const View& v : views) EXPECT_EQ(v.image, render(small_volume(), lut, v.pose));
  const auto pairs = training_pairs(views, s);
  ASSERT_EQ(pairs.size(), 45u);
  EXPECT_EQ(pairs[7].patch, 2);
  EXPECT_EQ(pairs[7].theta_x, views[1].pose.theta_x);
  EXPECT_EQ(pairs[7].theta_y, views[1].pose.theta_y);
  EXPECT_EQ(pairs[7].hr, quantize16(crop(views[1].image, 16, 0, 16, 16)));
  const auto tests = test_pairs(views, s);
  ASSERT_EQ(tests.size(), 9u);
  EXPECT_EQ(tests[0].patch, -1);
  EXPECT_EQ(tests[0].hr.h(), 32);
  EXPECT_EQ(tests[0].lr.h(), 8);
}

TEST(References, OffsetsStayInRangeAndAreSeeded) {
  DatasetSpec s;
  double lo = 1e9, hi = -1e9;
  for (std::size_t i = 0; i < 10000; ++i) {
    const auto o = reference_offsets(s, i);
    for (double v : o) {
      ASSERT_GE(v, -45.0);
      ASSERT_LE(v, 45.0);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  EXPECT_LT(lo, -44.0);
  EXPECT_GT(hi, 44.0);
  EXPECT_EQ(reference_offsets(s, 17), reference_offsets(s, 17));
  EXPECT_NE(reference_offsets(s, 17), reference_offsets(s, 18));
  s.seed = 5;
  EXPECT_NE(reference_offsets(DatasetSpec{}, 17), reference_offsets(s, 17));
  s.ref_rotation_range = 0;
  EXPECT_EQ(reference_offsets(s, 3), (std::array<double, 2>{0.0, 0.0}));
}

TEST(References, ZeroOffsetReproducesTheView) {
  const OpacityLut lut;
  ViewPose p;
  p.theta_x = 30;
  p.theta_y = 60;
  p.det_w = p.det_h = 32;
  EXPECT_EQ(generate_reference(small_volume(), lut, p, {0.0, 0.0}), render(small_volume(), lut, p));
  const DatasetSpec s = small_spec();
  EXPECT_EQ(generate_reference(small_volume(), lut, p, s, 4), generate_reference(small_volume(), lut, p, s, 4));
  const auto o = reference_offsets(s, 4);
  ViewPose q = p;
  q.theta_x += o[0];
  q.theta_y += o[1];
  EXPECT_EQ(generate_reference(small_volume(), lut, p, s, 4), render(small_volume(), lut, q));
}

TEST(Storage, EmptyDatasetRoundTrip) {
  const fs::path d = fresh_dir("empty");
  write_dataset({}, d);
  EXPECT_TRUE(read_dataset(d).empty());
  EXPECT_EQ(slurp(d / "manifest.tsv"), "#count\t0\nindex\tseries\ttheta_x\ttheta_y\tpatch\n");
}

TEST(Storage, PairsRoundTripBitwise) {
  std::vector<SamplePair> pairs;
  for (int i = 0; i < 10; ++i) {
    SamplePair p = make_pair(oracle::random_image(16, 16, 100 + i), 4);
    p.series = i % 3;
    p.theta_x = 0.1 * i + 1.0 / 3.0;
    p.theta_y = 24.0 * i;
    p.patch = i % 5;
    pairs.push_back(p);
  }
  std::vector<Image> refs(10, Image(16, 16, 0.5));
  const fs::path d = fresh_dir("ten");
  write_dataset(pairs, d, &refs);
  EXPECT_TRUE(fs::exists(d / "hr" / "00009.pgm"));
  EXPECT_TRUE(fs::exists(d / "ref" / "00000.pgm"));
  const auto back = read_dataset(d);
  ASSERT_EQ(back.size(), 10u);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(back[i].hr, pairs[i].hr);
    EXPECT_EQ(back[i].lr, pairs[i].lr);
    EXPECT_EQ(back[i].series, pairs[i].series);
    EXPECT_EQ(back[i].theta_x, pairs[i].theta_x);
    EXPECT_EQ(back[i].theta_y, pairs[i].theta_y);
    EXPECT_EQ(back[i].patch, pairs[i].patch);
  }
}

TEST(Storage, CorruptionIsDataError) {
  std::vector<SamplePair> pairs;
  for (int i = 0; i < 3; ++i) pairs.push_back(make_pair(oracle::random_image(8, 8, 200 + i), 4));
  const fs::path d = fresh_dir("corrupt");
  write_dataset(pairs, d);
  const std::string good = slurp(d / "manifest.tsv");
  auto put = [&](const std::string& s) { std::ofstream(d / "manifest.tsv", std::ios::binary) << s; };

  std::string edited = good;
  edited.replace(0, 8, "#count\t2");
  put(edited);
  EXPECT_THROW(read_dataset(d), DataError);

  put(good.substr(good.find('\n') + 1));
  EXPECT_THROW(read_dataset(d), DataError);

  put(good);
  fs::remove(d / "lr" / "00001.pgm");
  EXPECT_THROW(read_dataset(d), DataError);

  EXPECT_THROW(read_dataset(fresh_dir("absent")), DataError);
}
