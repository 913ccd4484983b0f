#pragma once

#include <cstdint>
#include <string>

#include "astereo/diff.hpp"
#include "astereo/grid.hpp"
#include "astereo/rig.hpp"

namespace astereo {

enum class FeatureMode { Identity, Patch, LearnedLinear };
enum class FeatureSource { Left, Right, Illumination };
enum class BaselineKind { Wide, Narrow, Fused };

FeatureMode parse_feature_mode(const std::string& name);
std::string to_string(FeatureMode mode);

/// One convolution layer: kernels (C*K) x K, bias C x 1.
struct LinearEncoder {
  Gridd kernels;
  Gridd bias;

  int channels() const { return kernels.cols() > 0 ? static_cast<int>(kernels.rows() / kernels.cols()) : 0; }
  int ksize() const { return static_cast<int>(kernels.cols()); }

  /// Every channel a centered delta (identity map), zero bias.
  static LinearEncoder delta(int channels, int ksize);
  /// Centered delta on channel 0 plus seeded N(0, sigma) on every tap.
  static LinearEncoder perturbed_delta(int channels, int ksize, double sigma, std::uint64_t seed);
};

struct MatcherParams {
  FeatureMode mode = FeatureMode::Patch;
  int patch_radius = 1;
  int window = 5;            ///< cost aggregation window (odd)
  double temperature = 1.0;  ///< softmax temperature
  int d_max = 32;            ///< wide-baseline candidates [0, d_max)
  bool binocular = false;    ///< drop the illuminator volume
  LinearEncoder cam;         ///< FE_cam, shared by both cameras
  LinearEncoder illum;       ///< FE_illum

  void validate() const;
  /// Learned-linear parameters with `channels` outputs of size ksize.
  static MatcherParams learned_linear(int channels, int ksize, double init_sigma, std::uint64_t seed);
};

struct FeatureMap {
  Gridd channels;  ///< (C*H) x W
  int count = 1;
  FeatureSource source = FeatureSource::Left;

  Eigen::Index rows() const { return channels.rows() / count; }
  Eigen::Index cols() const { return channels.cols(); }
};

struct CostVolume {
  Gridd cost;  ///< (D*H) x W
  int slices = 1;
  BaselineKind kind = BaselineKind::Wide;
  double ratio = 0;  ///< baseline ratio used for fused volumes

  Eigen::Index rows() const { return cost.rows() / slices; }
  Eigen::Index cols() const { return cost.cols(); }
};

FeatureMap extract_features(const Gridd& image, const MatcherParams& params, FeatureSource source);
/// cost[d](x, y) = window-sum of channel-summed |ref(x, y) - other(x - d, y)|, d in [0, d_count).
CostVolume build_cost_volume(const FeatureMap& ref, const FeatureMap& other, int d_count, int window,
                             BaselineKind kind = BaselineKind::Wide);
/// fused[d] = wide[d] + narrow at d * (b_narrow / b_wide); `ratio` is b_wide / b_narrow.
CostVolume fuse_volumes(const CostVolume& wide, const CostVolume& narrow, double ratio);
Gridd regress_disparity(const CostVolume& volume, double temperature);

/// Narrow volume depth needed for `params.d_max` wide candidates.
int narrow_disparity_count(const MatcherParams& params, const CameraRig& rig);

/// Left-view disparity from the two captures and the illumination image.
Gridd reconstruct(const Gridd& x_left, const Gridd& x_right, const Gridd& x_illum, const MatcherParams& params,
                  const CameraRig& rig);
/// Right-view disparity by mirroring the rig.
Gridd reconstruct_right(const Gridd& x_left, const Gridd& x_right, const Gridd& x_illum, const MatcherParams& params,
                        const CameraRig& rig);

/// Winner-take-all SAD block matching; ties go to the smallest disparity.
Gridd block_match_baseline(const Gridd& x_left, const Gridd& x_right, int window, int d_max);

/// Pixels of an estimated left disparity that agree with the right estimate within `threshold`.
Gridd consistency_mask(const Gridd& disp_left, const Gridd& disp_right, double threshold = 1.0);

// ---- differentiable path -------------------------------------------------------------------------

struct MatcherLeaves {
  diff::Var cam_kernels, cam_bias, illum_kernels, illum_bias;
};

/// Record the learned-linear parameters of `params` on a tape as leaves.
MatcherLeaves record_matcher_leaves(diff::Tape& tape, const MatcherParams& params);

diff::Var extract_features(const diff::Var& image, const MatcherParams& params, FeatureSource source,
                           const MatcherLeaves* leaves);
/// Same composition as reconstruct, recorded on the image's tape. Learned-linear weights come
/// from `leaves` when given, otherwise they are recorded as constants.
diff::Var reconstruct(const diff::Var& x_left, const diff::Var& x_right, const diff::Var& x_illum,
                      const MatcherParams& params, const CameraRig& rig, const MatcherLeaves* leaves = nullptr);

}  // namespace astereo
