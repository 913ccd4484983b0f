#include "astereo/pipeline.hpp"

#include <numbers>

namespace astereo {

void OpticsConfig::validate() const {
  if (n < 2) throw ConfigError("optics: N must be >= 2");
  if (!(pitch > 0) || !(wavelength > 0)) throw ConfigError("optics: pitch and wavelength must be positive");
  if (!(eta > 1)) throw ConfigError("optics: refractive index eta must be configured and exceed 1");
  if (levels < 2) throw ConfigError("optics: need at least 2 quantization levels");
  if (zeroth_order < 0 || zeroth_order > 1) throw ConfigError("optics: zeroth_order must lie in [0, 1]");
}

DOEProfile<double> doe_from_normalized(const Gridd& normalized, const OpticsConfig& optics) {
  optics.validate();
  return DOEProfile<double>(normalized * optics.max_height(), optics.eta, optics.levels, optics.pitch,
                            optics.wavelength);
}

Gridd normalized_from_doe(const DOEProfile<double>& doe) { return doe.heights() / doe.max_height(); }

IlluminationPattern<double> pattern_from_normalized(const Gridd& normalized, const OpticsConfig& optics,
                                                    const CameraRig& rig) {
  return simulate_pattern(doe_from_normalized(normalized, optics), rig, optics.pattern_options());
}

diff::Var pattern_from_normalized(const diff::Var& normalized, const OpticsConfig& optics, const CameraRig& rig) {
  optics.validate();
  diff::Tape& t = *normalized.tape();
  const auto laser = laser_field<double>(optics.n, optics.pitch, optics.wavelength, optics.circular_aperture);
  const diff::ComplexVar u = diff::complex_constant(t, laser.values());
  const diff::ComplexVar doe = diff::apply_phase_delay(u, normalized, 2.0 * std::numbers::pi);
  diff::Var p = diff::squared_magnitude(diff::dft2(doe));
  if (optics.zeroth_order > 0) p = diff::add_zeroth_order(p, optics.zeroth_order);
  return diff::clamp_nonnegative(
      diff::bicubic_rescale(p, camera_scale_factor(rig, optics.pitch, optics.n, optics.wavelength)));
}

NoisePair draw_noise(Eigen::Index rows, Eigen::Index cols, const CaptureConfig& env) {
  return NoisePair{gaussian_noise(rows, cols, env.noise_sigma, view_seed(env.rng_seed, View::Left)),
                   gaussian_noise(rows, cols, env.noise_sigma, view_seed(env.rng_seed, View::Right))};
}

Gridd supervision_mask(const SceneSample& scene, double threshold) {
  return lr_consistency_mask(scene.disp_L, scene.disp_R, -1.0, threshold);
}

PipelineVars forward_pipeline(const diff::Var& doe_normalized, const SceneSample& scene, const CaptureConfig& env,
                              const NoisePair& noise, const MatcherParams& matcher, const MatcherLeaves* leaves,
                              const CameraRig& rig, const OpticsConfig& optics, const Gridd& loss_mask) {
  env.validate();
  diff::Tape& t = *doe_normalized.tape();
  PipelineVars v;
  v.pattern = pattern_from_normalized(doe_normalized, optics, rig);
  require_same_shape(v.pattern.value(), scene.disp_L, "forward_pipeline: pattern vs scene");
  const diff::Var disp_l = t.constant(scene.disp_L);
  const diff::Var disp_r = t.constant(scene.disp_R);
  const diff::Var pl = diff::warp_rows(v.pattern, disp_l, scene.occ_L, illuminator_shift(View::Left, rig));
  const diff::Var pr = diff::warp_rows(v.pattern, disp_r, scene.occ_R, illuminator_shift(View::Right, rig));
  v.left = diff::radiometry_clamp(pl, t.constant(scene.refl_L), env, noise.left);
  v.right = diff::radiometry_clamp(pr, t.constant(scene.refl_R), env, noise.right);
  v.disparity = reconstruct(v.left, v.right, v.pattern, matcher, rig, leaves);
  v.loss = diff::masked_mae(v.disparity, scene.disp_L, loss_mask);
  return v;
}

}  // namespace astereo
