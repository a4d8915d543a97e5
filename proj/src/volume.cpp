#include "xsr/volume.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "xsr/error.hpp"

namespace xsr {

CtVolume::CtVolume(std::array<int, 3> dims, std::array<double, 3> spacing, std::vector<std::int16_t> voxels)
    : dims_(dims), spacing_(spacing), voxels_(std::move(voxels)) {
  for (int a = 0; a < 3; ++a) {
    require(dims_[a] >= 2, "CtVolume: every dimension must be >= 2");
    require(spacing_[a] > 0 && std::isfinite(spacing_[a]), "CtVolume: spacing must be positive");
  }
  require(voxels_.size() == static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2],
          "CtVolume: voxel count does not match dims");
  for (std::int16_t v : voxels_)
    require(v >= kHuMin && v <= kHuMax, "CtVolume: HU value out of range");
  build_bricks();
}

void CtVolume::build_bricks() {
  // Trilinear cells start at voxel 0..n-2, so n-1 cells per axis.
  for (int a = 0; a < 3; ++a) brick_dims_[a] = (dims_[a] - 1 + kBrick - 1) / kBrick;
  brick_ranges_.assign(static_cast<std::size_t>(brick_dims_[0]) * brick_dims_[1] * brick_dims_[2],
                       {std::int16_t(kHuMax), std::int16_t(kHuMin)});
  // Each voxel belongs to the brick containing it and, on a brick boundary,
  // to the preceding brick as well.
  auto bricks_of = [](int i, int nb) {
    const int b = i >> kBrickLog2;
    const int lo = (i % kBrick == 0 && b > 0) ? b - 1 : b;
    return std::pair{lo, std::min(b, nb - 1)};
  };
  for (int k = 0; k < dims_[2]; ++k) {
    const auto [bz0, bz1] = bricks_of(k, brick_dims_[2]);
    for (int j = 0; j < dims_[1]; ++j) {
      const auto [by0, by1] = bricks_of(j, brick_dims_[1]);
      for (int i = 0; i < dims_[0]; ++i) {
        const auto [bx0, bx1] = bricks_of(i, brick_dims_[0]);
        const std::int16_t v = voxels_[index(i, j, k)];
        for (int bz = bz0; bz <= bz1; ++bz)
          for (int by = by0; by <= by1; ++by)
            for (int bx = bx0; bx <= bx1; ++bx) {
              auto& r = brick_ranges_[(static_cast<std::size_t>(bz) * brick_dims_[1] + by) * brick_dims_[0] + bx];
              r.first = std::min(r.first, v);
              r.second = std::max(r.second, v);
            }
      }
    }
  }
}

std::array<double, 3> CtVolume::extent() const {
  return {(dims_[0] - 1) * spacing_[0], (dims_[1] - 1) * spacing_[1], (dims_[2] - 1) * spacing_[2]};
}

void OpacityLut::validate() const {
  require(mu_water >= 0 && std::isfinite(mu_water), "OpacityLut: mu_water must be finite and >= 0");
  for (std::size_t i = 1; i < table.size(); ++i)
    require(table[i].first > table[i - 1].first, "OpacityLut: breakpoints must be strictly increasing");
}

double mu_of(const OpacityLut& lut, double hu) {
  if (lut.table.empty()) return std::max(0.0, lut.mu_water * (1.0 + hu / 1000.0));
  const auto& t = lut.table;
  if (hu <= t.front().first) return std::max(0.0, t.front().second);
  if (hu >= t.back().first) return std::max(0.0, t.back().second);
  const auto hi = std::upper_bound(t.begin(), t.end(), hu, [](double v, const auto& e) { return v < e.first; });
  const auto lo = hi - 1;
  const double f = (hu - lo->first) / (hi->first - lo->first);
  return std::max(0.0, lo->second + f * (hi->second - lo->second));
}

bool mu_zero_on(const OpacityLut& lut, double lo, double hi) {
  if (lut.table.empty()) return lut.mu_water * (1.0 + hi / 1000.0) <= 0.0;
  // Piecewise linear: zero on the interval iff zero at both ends and at every
  // breakpoint in between.
  if (mu_of(lut, lo) != 0.0 || mu_of(lut, hi) != 0.0) return false;
  for (const auto& [h, m] : lut.table)
    if (h > lo && h < hi && std::max(0.0, m) != 0.0) return false;
  return true;
}

// ---------------------------------------------------------------- phantom

void PhantomSpec::validate() const {
  require(!primitives.empty(), "PhantomSpec: at least one primitive is required");
  for (int a = 0; a < 3; ++a) {
    require(dims[a] >= 16, "PhantomSpec: output dims must be >= 16 per axis");
    require(spacing[a] > 0, "PhantomSpec: spacing must be positive");
  }
  for (const auto& p : primitives) {
    for (double r : p.radii_mm) require(r > 0, "PhantomSpec: radii must be positive");
    require(p.texture_amplitude >= 0, "PhantomSpec: texture amplitude must be >= 0");
    require(p.texture_min_wavelength > 0 && p.texture_max_wavelength >= p.texture_min_wavelength,
            "PhantomSpec: bad texture wavelength range");
  }
}

PhantomSpec head_phantom_spec(std::uint64_t seed, std::array<int, 3> dims, std::array<double, 3> spacing) {
  PhantomSpec spec;
  spec.seed = seed;
  spec.dims = dims;
  spec.spacing = spacing;
  std::array<double, 3> size{};
  for (int a = 0; a < 3; ++a) size[a] = dims[a] * spacing[a];
  const double smin = std::min({size[0], size[1], size[2]});

  Ellipsoid skull;
  skull.radii_mm = {0.42 * size[0], 0.46 * size[1], 0.39 * size[2]};
  skull.hu = 1200;
  skull.texture_amplitude = 200;
  spec.primitives.push_back(skull);

  Ellipsoid brain;
  const double shell = 0.04 * smin;
  brain.radii_mm = {skull.radii_mm[0] - shell, skull.radii_mm[1] - shell, skull.radii_mm[2] - shell};
  brain.hu = 40;
  spec.primitives.push_back(brain);

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> frac(0.08, 0.25);
  std::uniform_real_distribution<double> hu(-100.0, 300.0);
  const int extra = 2 + static_cast<int>(rng() % 3);
  for (int i = 0; i < extra; ++i) {
    Ellipsoid e;
    for (int a = 0; a < 3; ++a) {
      e.radii_mm[a] = frac(rng) * brain.radii_mm[a];
      e.center_mm[a] = 0.5 * unit(rng) * (brain.radii_mm[a] - e.radii_mm[a]);
    }
    e.hu = std::round(hu(rng));
    spec.primitives.push_back(e);
  }
  return spec;
}

namespace {

struct Wave {
  std::array<double, 3> k;  // radians per voxel
  double phase;
};

std::vector<Wave> draw_waves(const Ellipsoid& e, std::mt19937_64& rng) {
  constexpr int kWaves = 8;
  std::vector<Wave> waves;
  if (e.texture_amplitude <= 0) return waves;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> lambda(e.texture_min_wavelength, e.texture_max_wavelength);
  std::uniform_real_distribution<double> phase(0.0, 2 * std::numbers::pi);
  for (int i = 0; i < kWaves; ++i) {
    std::array<double, 3> d{gauss(rng), gauss(rng), gauss(rng)};
    const double n = std::max(1e-12, std::hypot(d[0], d[1], d[2]));
    const double kmag = 2 * std::numbers::pi / lambda(rng);
    Wave w{{kmag * d[0] / n, kmag * d[1] / n, kmag * d[2] / n}, phase(rng)};
    waves.push_back(w);
  }
  return waves;
}

}  // namespace

CtVolume generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const auto [nx, ny, nz] = spec.dims;
  const auto [sx, sy, sz] = spec.spacing;

  std::mt19937_64 rng(spec.seed);
  std::vector<std::vector<Wave>> waves;
  std::vector<double> volume_of;
  for (const auto& p : spec.primitives) {
    waves.push_back(draw_waves(p, rng));
    volume_of.push_back(p.radii_mm[0] * p.radii_mm[1] * p.radii_mm[2]);
  }
  // Texture RMS equals texture_amplitude: eight unit sinusoids of RMS 1/sqrt(2)
  // sum to RMS 2, so each is scaled by amplitude/2.
  const std::size_t np = spec.primitives.size();

  std::vector<std::int16_t> vox(static_cast<std::size_t>(nx) * ny * nz, static_cast<std::int16_t>(-1000));
  for (int k = 0; k < nz; ++k) {
    const double z = (k - (nz - 1) / 2.0) * sz;
    for (int j = 0; j < ny; ++j) {
      const double y = (j - (ny - 1) / 2.0) * sy;
      for (int i = 0; i < nx; ++i) {
        const double x = (i - (nx - 1) / 2.0) * sx;
        std::size_t best = np;
        for (std::size_t p = 0; p < np; ++p) {
          const auto& e = spec.primitives[p];
          const double dx = (x - e.center_mm[0]) / e.radii_mm[0];
          const double dy = (y - e.center_mm[1]) / e.radii_mm[1];
          const double dz = (z - e.center_mm[2]) / e.radii_mm[2];
          if (dx * dx + dy * dy + dz * dz > 1.0) continue;
          if (best == np || volume_of[p] <= volume_of[best]) best = p;
        }
        if (best == np) continue;
        const auto& e = spec.primitives[best];
        double hu = e.hu;
        if (!waves[best].empty()) {
          double t = 0;
          for (const auto& w : waves[best]) t += std::sin(w.k[0] * i + w.k[1] * j + w.k[2] * k + w.phase);
          hu += 0.5 * e.texture_amplitude * t;
        }
        hu = std::clamp(std::round(hu), double(kHuMin), double(kHuMax));
        vox[(static_cast<std::size_t>(k) * ny + j) * nx + i] = static_cast<std::int16_t>(hu);
      }
    }
  }
  return CtVolume(spec.dims, spec.spacing, std::move(vox));
}

// ---------------------------------------------------------------- file I/O

void save_volume(const CtVolume& vol, const std::filesystem::path& header_path) {
  std::filesystem::path raw = header_path;
  raw.replace_extension(".raw");
  {
    std::ofstream h(header_path);
    if (!h) throw DataError("cannot write " + header_path.string());
    h.precision(17);
    h << "dims = " << vol.nx() << " " << vol.ny() << " " << vol.nz() << "\n";
    h << "spacing = " << vol.spacing()[0] << " " << vol.spacing()[1] << " " << vol.spacing()[2] << "\n";
    h << "dtype = int16le\n";
    h << "raw = " << raw.filename().string() << "\n";
    if (!h) throw DataError("write failed: " + header_path.string());
  }
  std::ofstream r(raw, std::ios::binary);
  if (!r) throw DataError("cannot write " + raw.string());
  std::vector<char> bytes(vol.voxel_count() * 2);
  for (std::size_t i = 0; i < vol.voxel_count(); ++i) {
    const auto u = static_cast<std::uint16_t>(vol.voxels()[i]);
    bytes[2 * i] = static_cast<char>(u & 0xff);
    bytes[2 * i + 1] = static_cast<char>(u >> 8);
  }
  r.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!r) throw DataError("write failed: " + raw.string());
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

CtVolume load_volume(const std::filesystem::path& header_path) {
  std::ifstream h(header_path);
  if (!h) throw DataError("cannot open volume header " + header_path.string());
  std::optional<std::array<int, 3>> dims;
  std::optional<std::array<double, 3>> spacing;
  std::string dtype, raw_name;
  std::string line;
  while (std::getline(h, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) throw DataError("volume header: malformed line '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    std::istringstream val(line.substr(eq + 1));
    if (key == "dims") {
      std::array<int, 3> d{};
      if (!(val >> d[0] >> d[1] >> d[2])) throw DataError("volume header: bad dims");
      dims = d;
    } else if (key == "spacing") {
      std::array<double, 3> s{};
      if (!(val >> s[0] >> s[1] >> s[2])) throw DataError("volume header: bad spacing");
      spacing = s;
    } else if (key == "dtype") {
      dtype = trim(line.substr(eq + 1));
    } else if (key == "raw") {
      raw_name = trim(line.substr(eq + 1));
    } else {
      throw DataError("volume header: unknown key '" + key + "'");
    }
  }
  if (!dims || !spacing || raw_name.empty()) throw DataError("volume header: missing dims, spacing or raw");
  if (dtype != "int16le") throw DataError("volume header: unsupported dtype '" + dtype + "'");
  for (int a = 0; a < 3; ++a) {
    if ((*dims)[a] < 2) throw DataError("volume header: dims must be >= 2");
    if (!((*spacing)[a] > 0)) throw DataError("volume header: spacing must be positive");
  }

  const std::filesystem::path raw = header_path.parent_path() / raw_name;
  std::ifstream r(raw, std::ios::binary | std::ios::ate);
  if (!r) throw DataError("cannot open raw payload " + raw.string());
  const auto bytes = static_cast<std::size_t>(r.tellg());
  const std::size_t count = static_cast<std::size_t>((*dims)[0]) * (*dims)[1] * (*dims)[2];
  if (bytes != 2 * count) {
    std::ostringstream msg;
    msg << "volume size mismatch: header declares " << count << " voxels (" << 2 * count << " bytes), raw file has "
        << bytes << " bytes";
    throw DataError(msg.str());
  }
  r.seekg(0);
  std::vector<unsigned char> buf(bytes);
  r.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  std::vector<std::int16_t> vox(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto u = static_cast<std::uint16_t>(buf[2 * i] | (buf[2 * i + 1] << 8));
    const auto v = static_cast<std::int16_t>(u);
    if (v < kHuMin || v > kHuMax) throw DataError("volume: HU value out of range at voxel " + std::to_string(i));
    vox[i] = v;
  }
  return CtVolume(*dims, *spacing, std::move(vox));
}

// ---------------------------------------------------------------- resampling

CtVolume resample_axis(const CtVolume& vol, Axis axis, double target_spacing) {
  const int a = static_cast<int>(axis);
  const double src = vol.spacing()[a];
  require(target_spacing > 0 && std::isfinite(target_spacing), "resample_axis: target spacing must be positive");
  if (target_spacing > src)
    fail_arg("resample_axis: target spacing exceeds source spacing; only densifying is supported");

  const int n = vol.dims()[a];
  const int n_out = static_cast<int>(std::floor((n - 1) * src / target_spacing + 1e-9)) + 1;
  auto dims = vol.dims();
  dims[a] = n_out;
  auto spacing = vol.spacing();
  spacing[a] = target_spacing;

  // Per output slice: lower source slice and weight of the upper one.
  std::vector<int> lo(n_out);
  std::vector<double> frac(n_out);
  for (int j = 0; j < n_out; ++j) {
    const double p = j * target_spacing / src;
    int k = static_cast<int>(std::floor(p));
    double f = p - k;
    if (k >= n - 1) {
      k = n - 2;
      f = std::min(1.0, p - k);
    }
    lo[j] = k;
    frac[j] = f;
  }

  std::vector<std::int16_t> out(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        std::array<int, 3> p0{i, j, k}, p1{i, j, k};
        const int t = p0[a];
        p0[a] = lo[t];
        p1[a] = lo[t] + 1;
        const double f = frac[t];
        const double v = (1.0 - f) * vol.at(p0[0], p0[1], p0[2]) + f * vol.at(p1[0], p1[1], p1[2]);
        out[(static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i] = static_cast<std::int16_t>(std::lround(v));
      }
  return CtVolume(dims, spacing, std::move(out));
}

}  // namespace xsr
