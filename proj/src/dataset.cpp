#include "xsr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "xsr/bicubic.hpp"
#include "xsr/error.hpp"

namespace xsr {

void DatasetSpec::validate() const {
  require(grid_n >= 1, "dataset: grid_n must be >= 1");
  require(step_deg > 0 && std::isfinite(step_deg), "dataset: step_deg must be > 0");
  require(test_step_deg > 0 && std::isfinite(test_step_deg), "dataset: test_step_deg must be > 0");
  require(test_count >= 1, "dataset: test_count must be >= 1");
  require(scale == 4, "dataset: scale is fixed at 4");
  require(patches_per_image == 5, "dataset: patches_per_image is fixed at 5");
  require(patch >= scale && patch % scale == 0, "dataset: patch must be a positive multiple of scale");
  require(view_size >= patch, "dataset: view_size must be >= patch");
  require(view_size % scale == 0, "dataset: view_size must be divisible by scale");
  require(ref_rotation_range >= 0 && std::isfinite(ref_rotation_range), "dataset: ref_rotation_range must be >= 0");
}

std::vector<ViewPose> view_poses(const DatasetSpec& spec, ViewMode mode) {
  spec.validate();
  std::vector<ViewPose> poses;
  auto pose = [&](double tx, double ty) {
    ViewPose p;
    p.theta_x = tx;
    p.theta_y = ty;
    p.det_w = p.det_h = spec.view_size;
    return p;
  };
  if (mode == ViewMode::train) {
    for (int i = 0; i < spec.grid_n; ++i)
      for (int j = 0; j < spec.grid_n; ++j) poses.push_back(pose(i * spec.step_deg, j * spec.step_deg));
    return poses;
  }
  // Test lattice covers one full turn on both axes.
  const int per_axis = std::max(1, static_cast<int>(std::floor(360.0 / spec.test_step_deg + 1e-9)));
  std::vector<int> cells(static_cast<std::size_t>(per_axis) * per_axis);
  std::iota(cells.begin(), cells.end(), 0);
  std::mt19937_64 rng(spec.seed ^ 0x7465737476696577ULL);
  const std::size_t take = std::min<std::size_t>(spec.test_count, cells.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, cells.size() - 1);
    std::swap(cells[i], cells[pick(rng)]);
    const int c = cells[i];
    poses.push_back(pose((c / per_axis) * spec.test_step_deg, (c % per_axis) * spec.test_step_deg));
  }
  return poses;
}

std::vector<View> generate_views(const CtVolume& vol, const OpacityLut& lut, const DatasetSpec& spec,
                                 ViewMode mode) {
  const std::vector<ViewPose> poses = view_poses(spec, mode);
  std::vector<View> views(poses.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < poses.size(); ++i) views[i] = View{poses[i], render_serial(vol, lut, poses[i])};
  return views;
}

std::array<std::array<int, 2>, 5> patch_offsets(int image_size, int patch) {
  require(image_size >= patch && patch > 0, "patch_offsets: patch larger than image");
  const int far = image_size - patch;
  const int mid = far / 2;
  return {{{0, 0}, {0, far}, {far, 0}, {far, far}, {mid, mid}}};
}

std::vector<Image> crop_patches(const Image& img, const DatasetSpec& spec) {
  spec.validate();
  if (img.h() < spec.view_size || img.w() < spec.view_size) {
    std::ostringstream msg;
    msg << "crop_patches: image " << img.h() << "x" << img.w() << " is smaller than " << spec.view_size << "x"
        << spec.view_size;
    fail_arg(msg.str());
  }
  std::vector<Image> out;
  for (const auto& [y, x] : patch_offsets(spec.view_size, spec.patch)) out.push_back(crop(img, y, x, spec.patch, spec.patch));
  return out;
}

SamplePair make_pair(const Image& hr, int scale) {
  require(scale >= 1 && hr.h() % scale == 0 && hr.w() % scale == 0, "make_pair: size not divisible by scale");
  SamplePair p;
  p.hr = quantize16(hr);
  p.lr = quantize16(bicubic_resample(p.hr, hr.h() / scale, hr.w() / scale));
  return p;
}

std::vector<SamplePair> make_pairs(const std::vector<Image>& patches, int scale) {
  std::vector<SamplePair> out;
  out.reserve(patches.size());
  for (const Image& p : patches) out.push_back(make_pair(p, scale));
  return out;
}

std::vector<SamplePair> training_pairs(const std::vector<View>& views, const DatasetSpec& spec) {
  std::vector<SamplePair> out;
  out.reserve(views.size() * spec.patches_per_image);
  for (const View& v : views) {
    const std::vector<Image> patches = crop_patches(v.image, spec);
    for (std::size_t k = 0; k < patches.size(); ++k) {
      SamplePair p = make_pair(patches[k], spec.scale);
      p.series = spec.series;
      p.theta_x = v.pose.theta_x;
      p.theta_y = v.pose.theta_y;
      p.patch = static_cast<int>(k);
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<SamplePair> test_pairs(const std::vector<View>& views, const DatasetSpec& spec) {
  std::vector<SamplePair> out;
  out.reserve(views.size());
  for (const View& v : views) {
    SamplePair p = make_pair(v.image, spec.scale);
    p.series = spec.series;
    p.theta_x = v.pose.theta_x;
    p.theta_y = v.pose.theta_y;
    p.patch = -1;
    out.push_back(std::move(p));
  }
  return out;
}

std::array<double, 2> reference_offsets(const DatasetSpec& spec, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x52454655u};
  std::mt19937_64 rng(seq);
  const double r = spec.ref_rotation_range;
  // Draw in [0,1) and map linearly so both ends stay inside [-r, r].
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = u(rng), b = u(rng);
  return {-r + 2.0 * r * a, -r + 2.0 * r * b};
}

Image generate_reference(const CtVolume& vol, const OpacityLut& lut, const ViewPose& view_pose,
                         std::array<double, 2> offsets) {
  ViewPose p = view_pose;
  p.theta_x += offsets[0];
  p.theta_y += offsets[1];
  return render(vol, lut, p);
}

Image generate_reference(const CtVolume& vol, const OpacityLut& lut, const ViewPose& view_pose,
                         const DatasetSpec& spec, std::size_t index) {
  spec.validate();
  return generate_reference(vol, lut, view_pose, reference_offsets(spec, index));
}

// ---------------------------------------------------------------- storage

namespace {

namespace fs = std::filesystem;

std::string file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu.pgm", i);
  return buf;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

constexpr const char* kHeader = "index\tseries\ttheta_x\ttheta_y\tpatch";

}  // namespace

void write_dataset(const std::vector<SamplePair>& pairs, const fs::path& dir, const std::vector<Image>* refs) {
  if (refs) require(refs->size() == pairs.size(), "write_dataset: one reference per pair required");
  std::error_code ec;
  for (const char* sub : {"hr", "lr"}) {
    fs::create_directories(dir / sub, ec);
    if (ec) throw DataError("cannot create " + (dir / sub).string() + ": " + ec.message());
  }
  if (refs) {
    fs::create_directories(dir / "ref", ec);
    if (ec) throw DataError("cannot create " + (dir / "ref").string() + ": " + ec.message());
  }
  std::ofstream man(dir / "manifest.tsv", std::ios::binary);
  if (!man) throw DataError("cannot write " + (dir / "manifest.tsv").string());
  man << "#count\t" << pairs.size() << "\n" << kHeader << "\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const SamplePair& p = pairs[i];
    write_pgm16(p.hr, dir / "hr" / file_name(i));
    write_pgm16(p.lr, dir / "lr" / file_name(i));
    if (refs) write_pgm16((*refs)[i], dir / "ref" / file_name(i));
    man << i << '\t' << p.series << '\t' << fmt(p.theta_x) << '\t' << fmt(p.theta_y) << '\t' << p.patch << "\n";
  }
  man.flush();
  if (!man) throw DataError("write failed: " + (dir / "manifest.tsv").string());
}

std::vector<SamplePair> read_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.tsv";
  std::ifstream man(mpath);
  if (!man) throw DataError("missing dataset manifest: " + mpath.string());
  std::string line;
  long declared = -1;
  if (!std::getline(man, line) || std::sscanf(line.c_str(), "#count\t%ld", &declared) != 1 || declared < 0)
    throw DataError("manifest: missing #count line in " + mpath.string());
  if (!std::getline(man, line) || line != kHeader) throw DataError("manifest: bad header in " + mpath.string());

  std::vector<SamplePair> out;
  while (std::getline(man, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::size_t index = 0;
    SamplePair p;
    if (!(row >> index >> p.series >> p.theta_x >> p.theta_y >> p.patch))
      throw DataError("manifest: malformed row '" + line + "'");
    if (index != out.size()) throw DataError("manifest: rows out of order at index " + std::to_string(index));
    const fs::path hr = dir / "hr" / file_name(index), lr = dir / "lr" / file_name(index);
    if (!fs::exists(hr) || !fs::exists(lr)) throw DataError("manifest: missing image files for index " + std::to_string(index));
    p.hr = read_pgm(hr);
    p.lr = read_pgm(lr);
    out.push_back(std::move(p));
  }
  if (static_cast<long>(out.size()) != declared)
    throw DataError("manifest: #count " + std::to_string(declared) + " but " + std::to_string(out.size()) + " rows");
  // Stray image files beyond the manifest also indicate a mismatch.
  if (fs::exists(dir / "hr" / file_name(out.size())))
    throw DataError("manifest: more image files than the declared count");
  return out;
}

}  // namespace xsr
