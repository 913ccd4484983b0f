#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "astereo/grid.hpp"
#include "astereo/interp.hpp"
#include "astereo/rig.hpp"
#include "astereo/wavefield.hpp"

namespace astereo {

/// Per-view ground truth of one scene. Occlusion masks are 1 where the illuminator reaches the surface.
struct SceneSample {
  Gridd disp_L, disp_R;
  Gridd refl_L, refl_R;
  Gridd occ_L, occ_R;
  std::string name;

  Eigen::Index rows() const { return disp_L.rows(); }
  Eigen::Index cols() const { return disp_L.cols(); }
  void validate() const;
};

/// Sensor and illumination parameters of one imaging environment.
struct CaptureConfig {
  double gamma = 1.0;
  double alpha = 0.0;
  double beta = 1.0;
  double noise_sigma = 0.0;
  double clip_lo = 0.0;
  double clip_hi = 1.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

enum class View { Left, Right };

/// Signed horizontal shift, in units of wide-baseline disparity, from a camera view to the illuminator.
double illuminator_shift(View view, const CameraRig& rig);

/// P_view = occ * P(x - shift * disp, y), linear interpolation, zero outside.
Gridd warp_pattern(const IlluminationPattern<double>& pattern, const Gridd& disp, const Gridd& occ, View view,
                   const CameraRig& rig);

/// Seeded, signal-independent Gaussian noise.
Gridd gaussian_noise(Eigen::Index rows, Eigen::Index cols, double sigma, std::uint64_t seed);

/// Deterministic sensor model with an explicit noise sample: clip(gamma (alpha + beta P) I + n).
template <typename Scalar>
Grid<Scalar> capture_with_noise(const Grid<Scalar>& p_view, const Grid<Scalar>& refl, const CaptureConfig& cfg,
                                const Grid<Scalar>& noise) {
  require_same_shape(p_view, refl, "capture");
  require_same_shape(p_view, noise, "capture");
  const auto g = static_cast<Scalar>(cfg.gamma), a = static_cast<Scalar>(cfg.alpha), b = static_cast<Scalar>(cfg.beta);
  return (g * (a + b * p_view) * refl + noise)
      .max(static_cast<Scalar>(cfg.clip_lo))
      .min(static_cast<Scalar>(cfg.clip_hi));
}

/// Sensor image of one view with noise drawn from cfg.rng_seed.
Gridd capture(const Gridd& p_view, const Gridd& refl, const CaptureConfig& cfg);

struct StereoCapture {
  Gridd left, right;
  Gridd illum;  ///< clean camera-grid pattern, the matcher's third input
};

/// Both views through warp_pattern and capture; the right view uses a seed derived from cfg.rng_seed.
StereoCapture synthesize_stereo(const IlluminationPattern<double>& pattern, const SceneSample& scene,
                                const CameraRig& rig, const CaptureConfig& cfg);

/// Seed used for a view's noise draw.
std::uint64_t view_seed(std::uint64_t seed, View view);

// ---------------------------------------------------------------------------------------------
// Toy scenes

/// Planar rectangle in illuminator-view pixel coordinates; z0 at x0, z1 at x1 (z1 == z0: fronto-parallel).
struct SceneRect {
  double x0, y0, x1, y1;
  double z0, z1;
  double reflectance;
};

struct SceneDescriptor {
  std::vector<SceneRect> rects;
  double background_z = 3.0;
  double background_reflectance = 0.5;
  Eigen::Index rows = 0, cols = 0;
};

/**
 * Plain-text scene format, one entry per line ('#' starts a comment):
 *   size <rows> <cols>
 *   background <z> <reflectance>
 *   <x0> <y0> <x1> <y1> <z> <reflectance> [<z_at_x1>]
 */
SceneDescriptor parse_scene_descriptor(std::istream& in);
SceneDescriptor read_scene_descriptor(const std::filesystem::path& path);

/// Inclusive depth range the simulation is valid for.
inline constexpr double kMinDepth = 0.4;
inline constexpr double kMaxDepth = 3.0;

/// Ray-cast disparity, reflectance and illuminator occlusion for both cameras.
SceneSample generate_toy_scene(const SceneDescriptor& desc, const CameraRig& rig,
                               std::vector<std::string>* warnings = nullptr);

/// Pixels of the first view whose match in the other view lands in frame with consistent disparity.
/// `sign` is -1 for left-to-right (x - d) and +1 for right-to-left (x + d).
Gridd lr_consistency_mask(const Gridd& disp_this, const Gridd& disp_other, double sign, double threshold = 1.0);

/// Shrink each horizontal run of zeros in a stereo-visibility mask to half its width, keeping the
/// half adjacent to the occluder. Returns an illuminator-occlusion mask (1 = lit).
Gridd shrink_occlusion_runs(const Gridd& stereo_visible, View view);

// ---------------------------------------------------------------------------------------------
// Dataset ingestion

struct IngestOptions {
  Eigen::Index rows = 0, cols = 0;  ///< 0 keeps the source size
  double nir_gain = 1.0;
  double nir_offset = 0.0;
  double lr_threshold = 1.0;
};

/// Affine luma proxy for NIR reflectance, clamped to [0, 1]. A single channel passes through gain/offset.
Gridd nir_proxy(const std::vector<Gridd>& channels, double gain = 1.0, double offset = 0.0);

/**
 * Streams samples from a directory laid out as
 *   <id>_disp_L.pfm  <id>_disp_R.pfm  <id>_L.{ppm,pgm}  <id>_R.{ppm,pgm}
 * Samples with missing or unreadable images are skipped with a diagnostic; a malformed PFM throws.
 */
class DatasetReader {
 public:
  DatasetReader(std::filesystem::path dir, IngestOptions options);

  std::optional<SceneSample> next();
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::filesystem::path dir_;
  IngestOptions options_;
  std::vector<std::string> ids_;
  std::size_t cursor_ = 0;
  std::vector<std::string> diagnostics_;
};

/// Turn a raw disparity pair plus reflectance into a SceneSample (cross-check, half-shrink, resize).
SceneSample assemble_sample(Gridd disp_L, Gridd disp_R, Gridd refl_L, Gridd refl_R, const IngestOptions& options);

}  // namespace astereo
