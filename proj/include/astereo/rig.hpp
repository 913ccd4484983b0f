#pragma once

#include <cmath>
#include <string>

#include "astereo/grid.hpp"

namespace astereo {

/// Pinhole stereo rig with the illuminator between the two cameras.
struct CameraRig {
  double focal = 6e-3;             ///< focal length [m]
  double pixel = 5.3e-6;           ///< pixel pitch [m]
  double baseline_wide = 55e-3;    ///< left <-> right [m]
  double baseline_narrow = 27.5e-3;  ///< left <-> illuminator [m]

  void validate() const {
    if (!(focal > 0) || !(pixel > 0) || !(baseline_wide > 0) || !(baseline_narrow > 0) ||
        !std::isfinite(focal + pixel + baseline_wide + baseline_narrow)) {
      throw ConfigError("camera rig: all lengths must be positive and finite");
    }
  }

  /// Wide-baseline disparity [px] of a point at depth z [m].
  double disparity(double z) const { return focal * baseline_wide / (pixel * z); }
  /// Depth [m] for a wide-baseline disparity [px].
  double depth(double d) const { return focal * baseline_wide / (pixel * d); }
  /// b_wide / b_narrow.
  double baseline_ratio() const { return baseline_wide / baseline_narrow; }

  /// Same rig with the illuminator placed halfway between the cameras.
  static CameraRig centered(double focal, double pixel, double baseline) {
    return CameraRig{focal, pixel, baseline, baseline / 2};
  }
};

}  // namespace astereo
