#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "astereo/fft.hpp"
#include "astereo/grid.hpp"
#include "astereo/interp.hpp"
#include "astereo/rig.hpp"

namespace astereo {

/// Sampled monochromatic wave on an N x N grid with physical pitch.
template <typename Scalar>
class ComplexField {
 public:
  ComplexField(CGrid<Scalar> values, Scalar pitch, Scalar wavelength)
      : values_(std::move(values)), pitch_(pitch), wavelength_(wavelength) {
    if (values_.rows() != values_.cols() || values_.rows() < 2) {
      throw ShapeError("ComplexField: grid must be square with N >= 2");
    }
    if (!(pitch_ > 0) || !(wavelength_ > 0)) {
      throw ConfigError("ComplexField: pitch and wavelength must be positive");
    }
  }

  const CGrid<Scalar>& values() const { return values_; }
  Grid<Scalar> re() const { return values_.real(); }
  Grid<Scalar> im() const { return values_.imag(); }
  Eigen::Index size() const { return values_.rows(); }
  Scalar pitch() const { return pitch_; }
  Scalar wavelength() const { return wavelength_; }
  Scalar power() const { return values_.abs2().sum(); }

 private:
  CGrid<Scalar> values_;
  Scalar pitch_;
  Scalar wavelength_;
};

/// DOE micro-relief. Heights are kept wrapped into [0, max_height).
template <typename Scalar>
class DOEProfile {
 public:
  DOEProfile(Grid<Scalar> heights, Scalar eta, int levels, Scalar pitch, Scalar wavelength)
      : heights_(std::move(heights)), eta_(eta), levels_(levels), pitch_(pitch), wavelength_(wavelength) {
    if (!(eta_ > 1)) throw ConfigError("DOEProfile: invalid material, refractive index must exceed 1");
    if (levels_ < 2) throw ConfigError("DOEProfile: need at least 2 quantization levels");
    if (!(pitch_ > 0) || !(wavelength_ > 0)) throw ConfigError("DOEProfile: pitch and wavelength must be positive");
    if (heights_.rows() != heights_.cols()) throw ShapeError("DOEProfile: height map must be square");
    if (!all_finite(heights_)) throw NumericError("DOEProfile: non-finite height");
    const Scalar hmax = max_height();
    heights_ = heights_.unaryExpr([hmax](Scalar h) {
      Scalar w = h - hmax * std::floor(h / hmax);
      return w >= hmax ? Scalar(0) : w;
    });
  }

  /// Height giving a full 2 pi phase delay.
  Scalar max_height() const { return wavelength_ / (eta_ - 1); }
  /// Phase delay per unit height, 2 pi (eta - 1) / lambda.
  Scalar phase_per_height() const { return Scalar(2) * std::numbers::pi_v<Scalar> * (eta_ - 1) / wavelength_; }

  const Grid<Scalar>& heights() const { return heights_; }
  Scalar eta() const { return eta_; }
  int levels() const { return levels_; }
  Scalar pitch() const { return pitch_; }
  Scalar wavelength() const { return wavelength_; }
  Eigen::Index size() const { return heights_.rows(); }

 private:
  Grid<Scalar> heights_;
  Scalar eta_;
  int levels_;
  Scalar pitch_;
  Scalar wavelength_;
};

/// Far-field intensity. Pitch follows v = lambda z / (u N) until resampled to the camera grid.
template <typename Scalar>
struct IlluminationPattern {
  Grid<Scalar> intensity;
  Scalar source_pitch = 0;  ///< u of the field it came from
  Scalar wavelength = 0;
  bool camera_resampled = false;

  Eigen::Index size() const { return intensity.rows(); }
  /// Physical sample pitch at depth z (meaningful before camera resampling).
  Scalar native_pitch(Scalar z) const {
    return wavelength * z / (source_pitch * static_cast<Scalar>(intensity.rows()));
  }
};

/// Collimated laser: unit amplitude, flat phase; optional circular aperture inscribed in the grid.
template <typename Scalar>
ComplexField<Scalar> laser_field(Eigen::Index n, Scalar pitch, Scalar wavelength, bool circular_aperture = false) {
  CGrid<Scalar> v = CGrid<Scalar>::Constant(n, n, std::complex<Scalar>(1, 0));
  if (circular_aperture) {
    const Scalar c = static_cast<Scalar>(n - 1) / 2;
    const Scalar r2 = (static_cast<Scalar>(n) / 2) * (static_cast<Scalar>(n) / 2);
    for (Eigen::Index y = 0; y < n; ++y) {
      for (Eigen::Index x = 0; x < n; ++x) {
        const Scalar dy = static_cast<Scalar>(y) - c, dx = static_cast<Scalar>(x) - c;
        if (dx * dx + dy * dy > r2) v(y, x) = 0;
      }
    }
  }
  return ComplexField<Scalar>(std::move(v), pitch, wavelength);
}

/// Multiply by exp(i k h) elementwise. Works on unwrapped heights.
template <typename Scalar>
CGrid<Scalar> apply_phase_delay(const CGrid<Scalar>& field, const Grid<Scalar>& heights, Scalar phase_per_height) {
  require_same_shape(field, heights, "apply_phase_delay");
  CGrid<Scalar> out(field.rows(), field.cols());
  for (Eigen::Index i = 0; i < field.size(); ++i) {
    out(i) = field(i) * std::polar(Scalar(1), phase_per_height * heights(i));
  }
  return out;
}

template <typename Scalar>
ComplexField<Scalar> apply_doe(const ComplexField<Scalar>& field, const DOEProfile<Scalar>& doe) {
  if (field.size() != doe.size()) throw ShapeError("apply_doe: DOE and field grids differ");
  const Scalar tol = Scalar(1e-9) * std::max(field.pitch(), doe.pitch());
  if (std::abs(field.pitch() - doe.pitch()) > tol) throw ShapeError("apply_doe: DOE and field pitches differ");
  return ComplexField<Scalar>(apply_phase_delay(field.values(), doe.heights(), doe.phase_per_height()), field.pitch(),
                              field.wavelength());
}

/// Fraunhofer propagation as a centered unitary DFT.
template <typename Scalar>
ComplexField<Scalar> propagate_far_field(const ComplexField<Scalar>& field) {
  if (!field.values().isFinite().all()) throw NumericError("propagate_far_field: non-finite input field");
  return ComplexField<Scalar>(centered_dft2(field.values()), field.pitch(), field.wavelength());
}

template <typename Scalar>
IlluminationPattern<Scalar> field_intensity(const ComplexField<Scalar>& field) {
  return IlluminationPattern<Scalar>{field.values().abs2(), field.pitch(), field.wavelength(), false};
}

/// Ratio of camera pixel footprint to pattern sample footprint, p u N / (f lambda). Depth cancels.
inline double camera_scale_factor(const CameraRig& rig, double pitch, Eigen::Index n, double wavelength) {
  return rig.pixel * pitch * static_cast<double>(n) / (rig.focal * wavelength);
}

/// Camera footprint over pattern footprint evaluated at an explicit depth; equals camera_scale_factor.
inline double camera_scale_factor_at_depth(const CameraRig& rig, double pitch, Eigen::Index n, double wavelength,
                                           double z) {
  const double camera_footprint = rig.pixel / rig.focal * z;
  const double pattern_footprint = wavelength * z / (pitch * static_cast<double>(n));
  return camera_footprint / pattern_footprint;
}

template <typename Scalar>
IlluminationPattern<Scalar> resample_to_camera(const IlluminationPattern<Scalar>& pattern, const CameraRig& rig) {
  if (pattern.camera_resampled) throw ContractError("resample_to_camera: pattern already on the camera grid");
  const double s = camera_scale_factor(rig, pattern.source_pitch, pattern.size(), pattern.wavelength);
  if (!(s > 0) || !std::isfinite(s)) throw ConfigError("resample_to_camera: invalid scale factor");
  IlluminationPattern<Scalar> out = pattern;
  // Catmull-Rom overshoot can dip below zero next to bright dots
  out.intensity = bicubic_rescale<Scalar>(pattern.intensity, static_cast<Scalar>(s)).max(Scalar(0));
  out.camera_resampled = true;
  return out;
}

/// Mix in an undiffracted center spot: (1 - kappa) P + kappa * sum(P) * delta_center.
template <typename Scalar>
IlluminationPattern<Scalar> add_zeroth_order(const IlluminationPattern<Scalar>& pattern, Scalar kappa) {
  if (kappa < 0 || kappa > 1) throw ConfigError("add_zeroth_order: kappa must lie in [0, 1]");
  IlluminationPattern<Scalar> out = pattern;
  const Scalar total = pattern.intensity.sum();
  out.intensity *= (1 - kappa);
  const Eigen::Index c = pattern.size() / 2;
  out.intensity(c, c) += kappa * total;
  return out;
}

/// Snap heights to `levels` uniform steps over [0, max_height); the top step wraps to 0.
template <typename Scalar>
DOEProfile<Scalar> quantize_heights(const DOEProfile<Scalar>& doe) {
  const Scalar step = doe.max_height() / static_cast<Scalar>(doe.levels());
  const int levels = doe.levels();
  Grid<Scalar> q = doe.heights().unaryExpr([step, levels](Scalar h) {
    auto k = static_cast<long>(std::llround(h / step));
    if (k >= levels) k = 0;
    return static_cast<Scalar>(k) * step;
  });
  return DOEProfile<Scalar>(std::move(q), doe.eta(), doe.levels(), doe.pitch(), doe.wavelength());
}

/// Uniform random heights in [0, max_height).
template <typename Scalar>
DOEProfile<Scalar> random_doe(Eigen::Index n, Scalar eta, int levels, Scalar pitch, Scalar wavelength,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const Scalar hmax = wavelength / (eta - 1);
  Grid<Scalar> h(n, n);
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = static_cast<Scalar>(uni(rng)) * hmax;
  return DOEProfile<Scalar>(std::move(h), eta, levels, pitch, wavelength);
}

struct PatternOptions {
  bool circular_aperture = false;
  double zeroth_order = 0.0;  ///< kappa
};

/// Laser -> DOE -> far field -> intensity -> camera grid.
template <typename Scalar>
IlluminationPattern<Scalar> simulate_pattern(const DOEProfile<Scalar>& doe, const CameraRig& rig,
                                             const PatternOptions& opts = {}) {
  const auto laser = laser_field<Scalar>(doe.size(), doe.pitch(), doe.wavelength(), opts.circular_aperture);
  auto pattern = field_intensity(propagate_far_field(apply_doe(laser, doe)));
  if (opts.zeroth_order > 0) pattern = add_zeroth_order(pattern, static_cast<Scalar>(opts.zeroth_order));
  return resample_to_camera(pattern, rig);
}

}  // namespace astereo
