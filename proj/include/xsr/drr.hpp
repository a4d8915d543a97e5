#pragma once

#include <array>

#include "xsr/image.hpp"
#include "xsr/volume.hpp"

namespace xsr {

/// Orthographic viewing geometry. The ray direction is Rx(theta_x) * Ry(theta_y)
/// applied to +z; detector rows/columns follow the rotated y/x axes and the
/// detector plane passes through the volume centre.
struct ViewPose {
  double theta_x = 0.0;  // degrees
  double theta_y = 0.0;  // degrees
  int det_w = 512;
  int det_h = 512;
  double pitch = 0.0;  // mm per detector pixel; <= 0 selects default_pitch()

  void validate() const;
};

/// Largest physical side of the volume spread over det_w pixels.
double default_pitch(const CtVolume& vol, int det_w);

struct RayFrame {
  std::array<double, 3> dir, u, v;
};
RayFrame ray_frame(double theta_x_deg, double theta_y_deg);

/// Beer-Lambert DRR: pixel = 1 - exp(-sum mu(trilinear HU) * ds) with fixed
/// step ds = min(spacing)/2, rows distributed over OpenMP threads.
Image render(const CtVolume& vol, const OpacityLut& lut, const ViewPose& pose);

/// Single-threaded reference; bitwise identical to render().
Image render_serial(const CtVolume& vol, const OpacityLut& lut, const ViewPose& pose);

}  // namespace xsr
