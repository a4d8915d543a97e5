#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "xsr/drr.hpp"
#include "xsr/image.hpp"
#include "xsr/volume.hpp"

namespace xsr {

struct DatasetSpec {
  int grid_n = 15;
  double step_deg = 24.0;
  double test_step_deg = 20.0;
  int test_count = 30;  // test views drawn from the test lattice
  int patch = 160;
  int patches_per_image = 5;
  int scale = 4;
  double ref_rotation_range = 45.0;  // degrees, symmetric
  bool with_ref = false;
  std::uint64_t seed = 0;
  int view_size = 512;
  int series = 0;

  void validate() const;
};

enum class ViewMode { train, test };

struct View {
  ViewPose pose;
  Image image;
};

struct SamplePair {
  Image hr;
  Image lr;
  int series = 0;
  double theta_x = 0.0;
  double theta_y = 0.0;
  int patch = -1;  // -1 for a whole test view
};

/// Poses only; generate_views renders exactly these.
std::vector<ViewPose> view_poses(const DatasetSpec& spec, ViewMode mode);

/// Renders every pose of view_poses(), distributing poses over threads.
std::vector<View> generate_views(const CtVolume& vol, const OpacityLut& lut, const DatasetSpec& spec,
                                 ViewMode mode);

/// Top-left offsets {y, x} of the 5 patches: four corners, then the centre.
std::array<std::array<int, 2>, 5> patch_offsets(int image_size, int patch);

/// 4 corners + centre, patch x patch each. The image must be at least
/// view_size x view_size.
std::vector<Image> crop_patches(const Image& img, const DatasetSpec& spec);

/// lr = bicubic_resample(hr, hr/scale), both snapped to the 16-bit grid.
SamplePair make_pair(const Image& hr, int scale);
std::vector<SamplePair> make_pairs(const std::vector<Image>& patches, int scale);

/// Training pairs for every view (patch = position in patch_offsets).
std::vector<SamplePair> training_pairs(const std::vector<View>& views, const DatasetSpec& spec);
/// One full-size pair per view.
std::vector<SamplePair> test_pairs(const std::vector<View>& views, const DatasetSpec& spec);

/// Angular offsets of the reference view for view `index`, each uniform in
/// [-range, range] and fully determined by (seed, index).
std::array<double, 2> reference_offsets(const DatasetSpec& spec, std::size_t index);

/// The volume re-rendered with the view's angles shifted by `offsets`.
Image generate_reference(const CtVolume& vol, const OpacityLut& lut, const ViewPose& view_pose,
                         std::array<double, 2> offsets);
Image generate_reference(const CtVolume& vol, const OpacityLut& lut, const ViewPose& view_pose,
                         const DatasetSpec& spec, std::size_t index);

/// hr/NNNNN.pgm, lr/NNNNN.pgm, optional ref/NNNNN.pgm and manifest.tsv.
void write_dataset(const std::vector<SamplePair>& pairs, const std::filesystem::path& dir,
                   const std::vector<Image>* refs = nullptr);
std::vector<SamplePair> read_dataset(const std::filesystem::path& dir);

}  // namespace xsr
