#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "astereo/matcher.hpp"
#include "astereo/optimize.hpp"
#include "astereo/pipeline.hpp"
#include "astereo/rig.hpp"
#include "astereo/scenesim.hpp"

namespace astereo {

// ---- configuration -------------------------------------------------------------------------------

/**
 * Run configuration. Text format: `[section]` headers and `key = value` lines, `#` or `;` comments.
 * Unknown sections or keys, duplicates and malformed values are rejected before anything runs.
 * See README for the key list.
 */
struct RunConfig {
  CameraRig rig;
  OpticsConfig optics;
  double beam_diameter = 1e-3;  ///< u N; used when the pitch is not given explicitly
  bool pitch_explicit = false;
  EnvironmentPreset environment = EnvironmentPreset::indoor();
  MatcherParams matcher;
  bool d_max_auto = true;
  int encoder_channels = 4;
  int encoder_ksize = 3;
  double encoder_init_sigma = 0.1;
  OptimHyper optimizer;
  std::uint64_t seed = 1;
  int scene_count = 5;
  std::filesystem::path output_dir;

  /// Optics resolved for an n x n grid (pitch from the beam diameter unless explicit).
  OpticsConfig optics_for(Eigen::Index n) const;
  /// Matcher with learned-linear encoders initialized and D_max resolved for a width.
  MatcherParams matcher_for(Eigen::Index width) const;
  void validate() const;
};

RunConfig parse_run_config(std::istream& in, const std::string& source = "<config>");
RunConfig read_run_config(const std::filesystem::path& path);

/// "0.2" or "0.0:0.5"
Range parse_range(const std::string& text);

/// Largest useful D_max for an image width: covers the nearest valid depth, capped below the width.
int auto_d_max(const CameraRig& rig, Eigen::Index width);

/// $ASTEREO_OUT if set, otherwise "out".
std::filesystem::path default_output_dir();

// ---- evaluation ------------------------------------------------------------------------------------

struct SceneEval {
  std::string name;
  double mae = 0;        ///< disparity [px]
  double depth_mae = 0;  ///< [m], over pixels where both disparities exceed 0.5 px
  std::vector<double> thresholds;
  std::vector<double> bad;  ///< fraction of valid pixels with |error| > threshold
  long valid = 0;
  long depth_valid = 0;
  long total = 0;
  bool degenerate = false;  ///< empty valid mask

  double valid_fraction() const { return total > 0 ? static_cast<double>(valid) / static_cast<double>(total) : 0.0; }
};

struct EvalReport {
  std::vector<SceneEval> scenes;
  SceneEval aggregate;  ///< valid-pixel-weighted means
  std::optional<PatternMetrics> pattern;
};

inline constexpr double kDepthGuard = 0.5;

SceneEval compute_eval(const Gridd& disp_est, const Gridd& disp_gt, const Gridd& valid_mask, const CameraRig& rig,
                       const std::vector<double>& thresholds = {1.0, 2.0, 4.0}, std::string name = {});
/// Aggregates in a canonical scene order, so permuting the input gives identical numbers.
EvalReport aggregate_eval(std::vector<SceneEval> scenes);

void write_eval_text(std::ostream& out, const EvalReport& report);
void write_eval_csv(const std::filesystem::path& path, const EvalReport& report);

// ---- reference scenes and runs -----------------------------------------------------------------------

/// One fronto-parallel plane filling an n x n frame.
SceneSample plane_scene(Eigen::Index n, double depth, const CameraRig& rig, double reflectance = 0.5);

/// Foreground rectangle over a background plane, drawn from `seed`.
SceneSample toy_training_scene(Eigen::Index n, std::uint64_t seed, const CameraRig& rig);
std::vector<SceneSample> toy_training_set(int count, Eigen::Index n, std::uint64_t seed, const CameraRig& rig);

/// Near rectangle over a far plane with a wide occlusion region, drawn from `seed`.
SceneSample occlusion_scene(Eigen::Index n, std::uint64_t seed, const CameraRig& rig);

/// Lit pixels within one jump width of a left-view disparity discontinuity.
Gridd occlusion_band(const SceneSample& scene);

/// Short-baseline rig used for the 32 x 32 training runs (disparities of a few pixels).
CameraRig training_rig();

/// Configuration of the committed reference optimization runs.
RunConfig reference_config(const std::string& preset = "indoor");

struct ReferenceRun {
  RunConfig config;
  std::vector<SceneSample> dataset;
  OptimState state;
};

/// Build the dataset and initial state for a config, then run joint_optimize.
ReferenceRun run_optimization(const RunConfig& config);

struct OcclusionComparison {
  std::string scene;
  double trinocular_mae = 0;
  double binocular_mae = 0;
  long band_pixels = 0;
};

struct ComparisonSettings {
  int scenes = 10;
  Eigen::Index size = 128;
  double noise_sigma = 0.02;
  std::uint64_t seed = 100;
  std::uint64_t doe_seed = 11;
  double eta = 1.5;
};

/// Trinocular vs binocular occlusion-band MAE on seeded two-plane scenes. Optionally writes error maps.
std::vector<OcclusionComparison> compare_trinocular(const ComparisonSettings& settings,
                                                    const std::filesystem::path& map_dir = {});

struct DesignBenchmark {
  DesignResult iterative_fft;
  DesignResult gradient;
};

/// Both design methods on a target generated by the forward model from a random DOE.
DesignBenchmark design_benchmark(Eigen::Index n = 64, int iterations = 200, std::uint64_t seed = 42);

/**
 * Figure analogues: fig4 (pattern grid of random vs designed vs optimized), fig5 (trinocular vs
 * binocular error maps), fig6 (indoor/outdoor patterns), fig7 (low/high noise patterns), fig8 (target
 * design convergence). fig4, fig6 and fig7 read checkpoints from `checkpoint_dir`.
 */
std::vector<std::filesystem::path> reproduce_figures(const std::string& which, const std::filesystem::path& outdir,
                                                     const std::filesystem::path& checkpoint_dir);

/// Pattern produced by a checkpoint's DOE under a config's optics and rig.
Gridd checkpoint_pattern(const OptimState& state, const RunConfig& config);

// ---- command line ----------------------------------------------------------------------------------

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

int cli(int argc, const char* const* argv);

}  // namespace astereo
