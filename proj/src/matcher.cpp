#include "astereo/matcher.hpp"

#include <random>

#include "astereo/matcher_kernels.hpp"
#include "astereo/scenesim.hpp"

namespace astereo {

FeatureMode parse_feature_mode(const std::string& name) {
  if (name == "identity") return FeatureMode::Identity;
  if (name == "patch") return FeatureMode::Patch;
  if (name == "learned-linear" || name == "learned_linear") return FeatureMode::LearnedLinear;
  throw ConfigError("unknown feature mode '" + name + "' (identity | patch | learned-linear)");
}

std::string to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::Identity: return "identity";
    case FeatureMode::Patch: return "patch";
    case FeatureMode::LearnedLinear: return "learned-linear";
  }
  return "?";
}

LinearEncoder LinearEncoder::delta(int channels, int ksize) {
  LinearEncoder e;
  e.kernels = Gridd::Zero(channels * ksize, ksize);
  for (int c = 0; c < channels; ++c) e.kernels(c * ksize + ksize / 2, ksize / 2) = 1.0;
  e.bias = Gridd::Zero(channels, 1);
  return e;
}

LinearEncoder LinearEncoder::perturbed_delta(int channels, int ksize, double sigma, std::uint64_t seed) {
  LinearEncoder e;
  e.kernels = Gridd::Zero(channels * ksize, ksize);
  e.kernels(ksize / 2, ksize / 2) = 1.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (Eigen::Index i = 0; i < e.kernels.size(); ++i) e.kernels(i) += n(rng);
  e.bias = Gridd::Zero(channels, 1);
  return e;
}

void MatcherParams::validate() const {
  if (window < 1 || window % 2 == 0) throw ConfigError("matcher: aggregation window must be odd and positive");
  if (!(temperature > 0)) throw ConfigError("matcher: temperature must be positive");
  if (d_max < 1) throw ConfigError("matcher: d_max must be at least 1");
  if (patch_radius < 0) throw ConfigError("matcher: patch radius must be >= 0");
  if (mode == FeatureMode::LearnedLinear) {
    for (const LinearEncoder* e : {&cam, &illum}) {
      if (e->ksize() < 1 || e->ksize() % 2 == 0 || e->kernels.rows() % e->kernels.cols() != 0) {
        throw ConfigError("matcher: learned-linear kernels must be (C*K) x K with K odd");
      }
      if (e->bias.rows() != e->channels() || e->bias.cols() != 1) throw ConfigError("matcher: bias must be C x 1");
    }
    if (cam.channels() != illum.channels()) throw ConfigError("matcher: encoders must produce the same channel count");
  }
}

MatcherParams MatcherParams::learned_linear(int channels, int ksize, double init_sigma, std::uint64_t seed) {
  MatcherParams p;
  p.mode = FeatureMode::LearnedLinear;
  p.cam = LinearEncoder::perturbed_delta(channels, ksize, init_sigma, seed);
  p.illum = LinearEncoder::perturbed_delta(channels, ksize, init_sigma, seed ^ 0x5bd1e995ULL);
  return p;
}

FeatureMap extract_features(const Gridd& image, const MatcherParams& params, FeatureSource source) {
  params.validate();
  FeatureMap f;
  f.source = source;
  switch (params.mode) {
    case FeatureMode::Identity:
      f.channels = image;
      f.count = 1;
      break;
    case FeatureMode::Patch: {
      const int side = 2 * params.patch_radius + 1;
      f.channels = kernels::patch_features<double>(image, params.patch_radius);
      f.count = side * side;
      break;
    }
    case FeatureMode::LearnedLinear: {
      const LinearEncoder& e = source == FeatureSource::Illumination ? params.illum : params.cam;
      f.channels = kernels::conv_features<double>(image, e.kernels, e.bias);
      f.count = e.channels();
      break;
    }
  }
  return f;
}

CostVolume build_cost_volume(const FeatureMap& ref, const FeatureMap& other, int d_count, int window, BaselineKind kind) {
  require_same_shape(ref.channels, other.channels, "build_cost_volume");
  if (ref.count != other.count) throw ShapeError("build_cost_volume: channel counts differ");
  if (d_count < 1) throw RangeError("build_cost_volume: need at least one disparity");
  if (d_count >= ref.cols()) throw RangeError("build_cost_volume: D_max must be below the image width");
  if (window < 1 || window % 2 == 0) throw ConfigError("build_cost_volume: window must be odd");
  return CostVolume{kernels::cost_volume<double>(ref.channels, other.channels, ref.rows(), d_count, window), d_count,
                    kind, 0.0};
}

CostVolume fuse_volumes(const CostVolume& wide, const CostVolume& narrow, double ratio) {
  if (!(ratio > 0)) throw ConfigError("fuse_volumes: baseline ratio must be positive");
  if (wide.rows() != narrow.rows() || wide.cols() != narrow.cols()) throw ShapeError("fuse_volumes: footprints differ");
  if (narrow.slices < kernels::narrow_slices_needed(wide.slices, ratio)) {
    throw RangeError("fuse_volumes: narrow volume does not cover the scaled disparity range");
  }
  return CostVolume{kernels::fuse_volumes<double>(wide.cost, narrow.cost, wide.rows(), ratio), wide.slices,
                    BaselineKind::Fused, ratio};
}

Gridd regress_disparity(const CostVolume& volume, double temperature) {
  if (!(temperature > 0)) throw ConfigError("regress_disparity: temperature must be positive");
  if (!all_finite(volume.cost)) throw NumericError("regress_disparity: non-finite cost");
  return kernels::soft_regress<double>(volume.cost, volume.rows(), temperature);
}

int narrow_disparity_count(const MatcherParams& params, const CameraRig& rig) {
  return kernels::narrow_slices_needed(params.d_max, rig.baseline_ratio());
}

Gridd reconstruct(const Gridd& x_left, const Gridd& x_right, const Gridd& x_illum, const MatcherParams& params,
                  const CameraRig& rig) {
  params.validate();
  require_same_shape(x_left, x_right, "reconstruct");
  const FeatureMap fl = extract_features(x_left, params, FeatureSource::Left);
  const FeatureMap fr = extract_features(x_right, params, FeatureSource::Right);
  CostVolume vol = build_cost_volume(fl, fr, params.d_max, params.window, BaselineKind::Wide);
  if (!params.binocular) {
    require_same_shape(x_left, x_illum, "reconstruct");
    const FeatureMap fi = extract_features(x_illum, params, FeatureSource::Illumination);
    const CostVolume narrow =
        build_cost_volume(fl, fi, narrow_disparity_count(params, rig), params.window, BaselineKind::Narrow);
    vol = fuse_volumes(vol, narrow, rig.baseline_ratio());
  }
  return regress_disparity(vol, params.temperature);
}

Gridd reconstruct_right(const Gridd& x_left, const Gridd& x_right, const Gridd& x_illum, const MatcherParams& params,
                        const CameraRig& rig) {
  CameraRig mirrored = rig;
  mirrored.baseline_narrow = rig.baseline_wide - rig.baseline_narrow;
  const Gridd fl = x_right.rowwise().reverse();
  const Gridd fr = x_left.rowwise().reverse();
  const Gridd fi = x_illum.rowwise().reverse();
  return reconstruct(fl, fr, fi, params, mirrored).rowwise().reverse();
}

Gridd block_match_baseline(const Gridd& x_left, const Gridd& x_right, int window, int d_max) {
  require_same_shape(x_left, x_right, "block_match_baseline");
  if (window < 1 || window % 2 == 0) throw ConfigError("block_match_baseline: window must be odd");
  if (d_max < 1 || d_max >= x_left.cols()) throw RangeError("block_match_baseline: invalid disparity range");
  const Eigen::Index h = x_left.rows(), w = x_left.cols();
  Gridd best = Gridd::Constant(h, w, std::numeric_limits<double>::infinity());
  Gridd disp = Gridd::Zero(h, w);
  for (int d = 0; d < d_max; ++d) {
    const Gridd cost = kernels::box_sum<double>(kernels::abs_difference<double>(x_left, x_right, h, d), window / 2);
    for (Eigen::Index i = 0; i < cost.size(); ++i) {
      if (cost(i) < best(i)) {
        best(i) = cost(i);
        disp(i) = d;
      }
    }
  }
  return disp;
}

Gridd consistency_mask(const Gridd& disp_left, const Gridd& disp_right, double threshold) {
  return lr_consistency_mask(disp_left, disp_right, -1.0, threshold);
}

// ---- differentiable path ---------------------------------------------------------------------------

MatcherLeaves record_matcher_leaves(diff::Tape& tape, const MatcherParams& params) {
  return MatcherLeaves{tape.leaf(params.cam.kernels), tape.leaf(params.cam.bias), tape.leaf(params.illum.kernels),
                       tape.leaf(params.illum.bias)};
}

diff::Var extract_features(const diff::Var& image, const MatcherParams& params, FeatureSource source,
                           const MatcherLeaves* leaves) {
  switch (params.mode) {
    case FeatureMode::Identity: return image;
    case FeatureMode::Patch: return diff::patch_features(image, params.patch_radius);
    case FeatureMode::LearnedLinear: {
      diff::Tape& t = *image.tape();
      const bool illum = source == FeatureSource::Illumination;
      diff::Var k, b;
      if (leaves) {
        k = illum ? leaves->illum_kernels : leaves->cam_kernels;
        b = illum ? leaves->illum_bias : leaves->cam_bias;
      } else {
        const LinearEncoder& e = illum ? params.illum : params.cam;
        k = t.constant(e.kernels);
        b = t.constant(e.bias);
      }
      return diff::conv_features(image, k, b);
    }
  }
  throw ConfigError("unknown feature mode");
}

diff::Var reconstruct(const diff::Var& x_left, const diff::Var& x_right, const diff::Var& x_illum,
                      const MatcherParams& params, const CameraRig& rig, const MatcherLeaves* leaves) {
  params.validate();
  const diff::Var fl = extract_features(x_left, params, FeatureSource::Left, leaves);
  const diff::Var fr = extract_features(x_right, params, FeatureSource::Right, leaves);
  diff::Var vol = diff::cost_volume(fl, fr, params.d_max, params.window);
  if (!params.binocular) {
    const diff::Var fi = extract_features(x_illum, params, FeatureSource::Illumination, leaves);
    const diff::Var narrow = diff::cost_volume(fl, fi, narrow_disparity_count(params, rig), params.window);
    vol = diff::fuse_volumes(vol, narrow, rig.baseline_ratio());
  }
  return diff::soft_regress(vol, params.temperature);
}

}  // namespace astereo
