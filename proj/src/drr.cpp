#include "xsr/drr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "xsr/error.hpp"

namespace xsr {

void ViewPose::validate() const {
  require(std::isfinite(theta_x) && std::isfinite(theta_y), "ViewPose: angles must be finite");
  require(det_w >= 8 && det_h >= 8, "ViewPose: detector must be at least 8x8");
  require(std::isfinite(pitch), "ViewPose: pitch must be finite");
}

double default_pitch(const CtVolume& vol, int det_w) {
  double side = 0;
  for (int a = 0; a < 3; ++a) side = std::max(side, vol.dims()[a] * vol.spacing()[a]);
  return side / det_w;
}

RayFrame ray_frame(double theta_x_deg, double theta_y_deg) {
  const double ax = theta_x_deg * std::numbers::pi / 180.0;
  const double ay = theta_y_deg * std::numbers::pi / 180.0;
  const double cx = std::cos(ax), sx = std::sin(ax);
  const double cy = std::cos(ay), sy = std::sin(ay);
  // R = Rx * Ry; columns of R are the images of the basis vectors.
  const double r[3][3] = {
      {cy, 0.0, sy},
      {sx * sy, cx, -sx * cy},
      {-cx * sy, sx, cx * cy},
  };
  RayFrame f;
  for (int i = 0; i < 3; ++i) {
    f.u[i] = r[i][0];
    f.v[i] = r[i][1];
    f.dir[i] = r[i][2];
  }
  return f;
}

namespace {

class Projector {
 public:
  Projector(const CtVolume& vol, const OpacityLut& lut, const ViewPose& pose)
      : vol_(vol), lut_(lut), pose_(pose), frame_(ray_frame(pose.theta_x, pose.theta_y)) {
    pose.validate();
    lut.validate();
    pitch_ = pose.pitch > 0 ? pose.pitch : default_pitch(vol, pose.det_w);
    step_ = std::min({vol.spacing()[0], vol.spacing()[1], vol.spacing()[2]}) / 2.0;
    for (int a = 0; a < 3; ++a) {
      half_[a] = (vol.dims()[a] - 1) / 2.0 * vol.spacing()[a];
      inv_sp_[a] = 1.0 / vol.spacing()[a];
      centre_[a] = (vol.dims()[a] - 1) / 2.0;
      lim_[a] = vol.dims()[a] - 1;
      last_cell_[a] = vol.dims()[a] - 2;
      bdims_[a] = vol.brick_dims()[a];
    }
    vox_ = vol.voxels().data();
    sy_ = static_cast<std::size_t>(vol.nx());
    sz_ = sy_ * vol.ny();
    const auto& ranges = vol.brick_ranges();
    empty_.resize(ranges.size());
    for (std::size_t b = 0; b < ranges.size(); ++b)
      empty_[b] = mu_zero_on(lut, ranges[b].first, ranges[b].second) ? 1 : 0;
  }

  [[gnu::noinline]] void row(int r, double* out) const {
    const double ov = (r + 0.5 - pose_.det_h / 2.0) * pitch_;
    for (int c = 0; c < pose_.det_w; ++c) {
      const double ou = (c + 0.5 - pose_.det_w / 2.0) * pitch_;
      std::array<double, 3> p;
      for (int a = 0; a < 3; ++a) p[a] = ou * frame_.u[a] + ov * frame_.v[a];
      const double integral = line_integral(p);
      out[c] = std::clamp(1.0 - std::exp(-integral), 0.0, 1.0);
    }
  }

 private:
  double line_integral(const std::array<double, 3>& p) const {
    // Clip the infinite line p + t*dir against the box spanned by voxel centres.
    constexpr double kParallel = 1e-12;
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      const double d = frame_.dir[a];
      if (std::abs(d) < kParallel) {
        if (std::abs(p[a]) > half_[a] * (1 + 1e-12)) return 0.0;
        continue;
      }
      double ta = (-half_[a] - p[a]) / d;
      double tb = (half_[a] - p[a]) / d;
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    const double len = t1 - t0;
    if (!(len > 0)) return 0.0;

    const long full = static_cast<long>(std::ceil(len / step_ - 1e-9)) - 1;
    // Sample positions in voxel-index coordinates: base + (j + 0.5) * delta.
    double base[3], delta[3];
    for (int a = 0; a < 3; ++a) {
      base[a] = (p[a] + t0 * frame_.dir[a]) * inv_sp_[a] + centre_[a];
      delta[a] = step_ * frame_.dir[a] * inv_sp_[a];
    }
    double acc = 0.0;
    for (long j = 0; j < full; ++j) {
      const double s = j + 0.5;
      acc += sample(base[0] + s * delta[0], base[1] + s * delta[1], base[2] + s * delta[2]);
    }
    acc *= step_;
    const double rem = len - full * step_;
    if (rem > 0) {
      const double t = t0 + full * step_ + 0.5 * rem;
      double q[3];
      for (int a = 0; a < 3; ++a) q[a] = (p[a] + t * frame_.dir[a]) * inv_sp_[a] + centre_[a];
      acc += rem * sample(q[0], q[1], q[2]);
    }
    return acc;
  }

  // mu at a point in index coordinates; bricks known to be air return 0 without
  // touching the voxels, which leaves the accumulated sum unchanged.
  double sample(double x, double y, double z) const {
    int i[3];
    double f[3];
    const double q[3] = {x, y, z};
    for (int a = 0; a < 3; ++a) {
      const double c = std::clamp(q[a], 0.0, lim_[a]);
      int ia = static_cast<int>(c);
      if (ia > last_cell_[a]) ia = last_cell_[a];
      i[a] = ia;
      f[a] = c - ia;
    }
    const int b = ((i[2] >> CtVolume::kBrickLog2) * bdims_[1] + (i[1] >> CtVolume::kBrickLog2)) * bdims_[0] +
                  (i[0] >> CtVolume::kBrickLog2);
    if (empty_[b]) return 0.0;
    const std::int16_t* base = vox_ + (static_cast<std::size_t>(i[2]) * sz_ + static_cast<std::size_t>(i[1]) * sy_ + i[0]);
    const double c00 = base[0] + f[0] * (base[1] - base[0]);
    const double c10 = base[sy_] + f[0] * (base[sy_ + 1] - base[sy_]);
    const double c01 = base[sz_] + f[0] * (base[sz_ + 1] - base[sz_]);
    const double c11 = base[sz_ + sy_] + f[0] * (base[sz_ + sy_ + 1] - base[sz_ + sy_]);
    const double c0 = c00 + f[1] * (c10 - c00);
    const double c1 = c01 + f[1] * (c11 - c01);
    return mu(c0 + f[2] * (c1 - c0));
  }

  double mu(double hu) const {
    if (lut_.table.empty()) return std::max(0.0, lut_.mu_water * (1.0 + hu / 1000.0));
    return mu_of(lut_, hu);
  }

  const CtVolume& vol_;
  const OpacityLut& lut_;
  ViewPose pose_;
  RayFrame frame_;
  double pitch_ = 0, step_ = 0;
  double half_[3]{}, inv_sp_[3]{}, centre_[3]{}, lim_[3]{};
  int last_cell_[3]{}, bdims_[3]{};
  const std::int16_t* vox_ = nullptr;
  std::size_t sy_ = 0, sz_ = 0;
  std::vector<std::uint8_t> empty_;
};

}  // namespace

Image render(const CtVolume& vol, const OpacityLut& lut, const ViewPose& pose) {
  const Projector proj(vol, lut, pose);
  Image img(pose.det_h, pose.det_w);
#pragma omp parallel for schedule(dynamic, 4)
  for (int r = 0; r < pose.det_h; ++r) proj.row(r, img.data() + static_cast<std::size_t>(r) * pose.det_w);
  return img;
}

Image render_serial(const CtVolume& vol, const OpacityLut& lut, const ViewPose& pose) {
  const Projector proj(vol, lut, pose);
  Image img(pose.det_h, pose.det_w);
  for (int r = 0; r < pose.det_h; ++r) proj.row(r, img.data() + static_cast<std::size_t>(r) * pose.det_w);
  return img;
}

}  // namespace xsr
