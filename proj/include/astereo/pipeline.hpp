#pragma once

#include "astereo/diff.hpp"
#include "astereo/matcher.hpp"
#include "astereo/rig.hpp"
#include "astereo/scenesim.hpp"
#include "astereo/wavefield.hpp"

namespace astereo {

/// Illumination-module parameters. The refractive index has no default and must be configured.
struct OpticsConfig {
  Eigen::Index n = 32;
  double pitch = 1e-3 / 32;  ///< u; the beam (u N) defaults to 1 mm
  double wavelength = 850e-9;
  double eta = 0;
  int levels = 16;
  bool circular_aperture = false;
  double zeroth_order = 0.0;

  void validate() const;
  double max_height() const { return wavelength / (eta - 1); }
  PatternOptions pattern_options() const { return PatternOptions{circular_aperture, zeroth_order}; }
};

/// DOE from heights normalized by max_height (any real value; wrapped on conversion).
DOEProfile<double> doe_from_normalized(const Gridd& normalized, const OpticsConfig& optics);
Gridd normalized_from_doe(const DOEProfile<double>& doe);

/// Camera-grid pattern for normalized heights (plain evaluation).
IlluminationPattern<double> pattern_from_normalized(const Gridd& normalized, const OpticsConfig& optics,
                                                    const CameraRig& rig);

/// Differentiable counterpart: phase = 2 pi t, so the map is smooth and periodic in t.
diff::Var pattern_from_normalized(const diff::Var& normalized, const OpticsConfig& optics, const CameraRig& rig);

struct PipelineVars {
  diff::Var pattern;
  diff::Var left, right;
  diff::Var disparity;
  diff::Var loss;
};

/// Noise samples are constants of one forward pass.
struct NoisePair {
  Gridd left, right;
};

NoisePair draw_noise(Eigen::Index rows, Eigen::Index cols, const CaptureConfig& env);

/// Pixels used by the supervised loss: ground truth left-right consistent.
Gridd supervision_mask(const SceneSample& scene, double threshold = 1.0);

/**
 * Normalized DOE heights -> pattern -> stereo captures -> trinocular matcher -> masked MAE
 * against the left ground truth disparity.
 */
PipelineVars forward_pipeline(const diff::Var& doe_normalized, const SceneSample& scene, const CaptureConfig& env,
                              const NoisePair& noise, const MatcherParams& matcher, const MatcherLeaves* leaves,
                              const CameraRig& rig, const OpticsConfig& optics, const Gridd& loss_mask);

}  // namespace astereo
