#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

namespace xsr {

inline constexpr int kHuMin = -1024;
inline constexpr int kHuMax = 4095;

enum class Axis { x = 0, y = 1, z = 2 };

/// CT grid of signed HU values, x-fastest. Voxel centres sit at
/// (i - (n-1)/2) * spacing so the volume is centred on the origin.
class CtVolume {
 public:
  CtVolume(std::array<int, 3> dims, std::array<double, 3> spacing, std::vector<std::int16_t> voxels);

  int nx() const { return dims_[0]; }
  int ny() const { return dims_[1]; }
  int nz() const { return dims_[2]; }
  const std::array<int, 3>& dims() const { return dims_; }
  const std::array<double, 3>& spacing() const { return spacing_; }
  std::size_t voxel_count() const { return voxels_.size(); }
  const std::vector<std::int16_t>& voxels() const { return voxels_; }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims_[1] + j) * dims_[0] + i;
  }
  std::int16_t at(int i, int j, int k) const { return voxels_[index(i, j, k)]; }

  /// Physical length covered by voxel centres along each axis.
  std::array<double, 3> extent() const;

  /// HU range of every brick of kBrick^3 trilinear cells (voxels
  /// [b*kBrick, (b+1)*kBrick] inclusive per axis), for empty-space skipping.
  static constexpr int kBrickLog2 = 3;
  static constexpr int kBrick = 1 << kBrickLog2;
  const std::array<int, 3>& brick_dims() const { return brick_dims_; }
  const std::vector<std::pair<std::int16_t, std::int16_t>>& brick_ranges() const { return brick_ranges_; }

 private:
  void build_bricks();

  std::array<int, 3> dims_;
  std::array<double, 3> spacing_;
  std::vector<std::int16_t> voxels_;
  std::array<int, 3> brick_dims_{};
  std::vector<std::pair<std::int16_t, std::int16_t>> brick_ranges_;
};

/// HU -> linear attenuation (mm^-1). Without a table the Hounsfield identity
/// mu = mu_water * (1 + HU/1000) is used, clamped at zero.
struct OpacityLut {
  double mu_water = 0.02;
  std::vector<std::pair<double, double>> table;  // (HU, mu), strictly increasing HU

  void validate() const;
};

double mu_of(const OpacityLut& lut, double hu);

/// True when mu_of is exactly zero for every HU in [lo, hi].
bool mu_zero_on(const OpacityLut& lut, double lo, double hi);

struct Ellipsoid {
  std::array<double, 3> center_mm{0, 0, 0};  // relative to the volume centre
  std::array<double, 3> radii_mm{1, 1, 1};
  double hu = 0.0;
  double texture_amplitude = 0.0;  // peak HU deviation of the texture term
  double texture_min_wavelength = 2.0;  // voxels
  double texture_max_wavelength = 8.0;
};

struct PhantomSpec {
  std::uint64_t seed = 0;
  std::vector<Ellipsoid> primitives;
  std::array<int, 3> dims{256, 256, 256};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};

  void validate() const;
};

/// Voxel size of the default head phantom. At water-level attenuation a
/// full-size head drives nearly every ray to saturation, so the default
/// phantom is a 64 mm scale model.
inline constexpr double kHeadSpacingMm = 0.25;

/// Head-like default: textured bone shell, soft-tissue interior and 2-4
/// random internal ellipsoids, all drawn from `seed`.
PhantomSpec head_phantom_spec(std::uint64_t seed, std::array<int, 3> dims = {256, 256, 256},
                              std::array<double, 3> spacing = {kHeadSpacingMm, kHeadSpacingMm, kHeadSpacingMm});

CtVolume generate_phantom(const PhantomSpec& spec);

/// Writes `header_path` plus a sibling `<stem>.raw` payload.
void save_volume(const CtVolume& vol, const std::filesystem::path& header_path);
CtVolume load_volume(const std::filesystem::path& header_path);

/// Densifies one axis to `target_spacing` by linear interpolation between
/// neighbouring slices; first and last slice positions are preserved.
CtVolume resample_axis(const CtVolume& vol, Axis axis, double target_spacing);

}  // namespace xsr
