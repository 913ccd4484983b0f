#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "astereo/matcher.hpp"
#include "astereo/pipeline.hpp"
#include "astereo/scenesim.hpp"

namespace astereo {

struct Range {
  double lo = 0, hi = 0;
};

/// Imaging environment to train for. Ranges are sampled uniformly each iteration.
struct EnvironmentPreset {
  std::string name = "custom";
  Range alpha{0, 0};
  Range beta{1, 1};
  std::vector<double> noise_sigma{0.02};  ///< one value drawn per iteration
  double gamma = 1.0;

  static EnvironmentPreset indoor();
  static EnvironmentPreset outdoor();
  static EnvironmentPreset generic();
  static EnvironmentPreset from_name(const std::string& name);

  void validate() const;
  CaptureConfig sample(std::mt19937_64& rng) const;
};

struct OptimHyper {
  int iterations = 200;
  int batch = 1;
  double lr_doe = 0.02;
  double lr_matcher = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int workers = 1;
  bool train_doe = true;
  bool train_matcher = true;
  std::filesystem::path dump_dir;  ///< diagnostics on numeric failure (empty: none)

  void validate() const;
};

struct LossRecord {
  double loss = 0, alpha = 0, beta = 0, noise_sigma = 0;
};

struct AdamMoments {
  Gridd m, v;
};

/// Everything needed to continue an optimization bit-identically.
struct OptimState {
  Gridd doe;  ///< heights normalized by max_height, kept in [0, 1)
  MatcherParams matcher;
  AdamMoments doe_moments;
  std::vector<AdamMoments> matcher_moments;  ///< cam kernels, cam bias, illum kernels, illum bias
  std::uint64_t iteration = 0;
  std::uint64_t seed = 0;
  std::vector<LossRecord> history;
};

/// Uniform random DOE in [0, 1) and zeroed moments.
OptimState initial_state(const OpticsConfig& optics, const MatcherParams& matcher, std::uint64_t seed);

/**
 * Adam on the masked disparity MAE until state.iteration == hyper.iterations. Each iteration
 * draws its scenes, environment and noise from (seed, iteration), so a resumed run replays the
 * same sequence.
 */
OptimState joint_optimize(const std::vector<SceneSample>& dataset, const CameraRig& rig, const OpticsConfig& optics,
                          const EnvironmentPreset& preset, const OptimHyper& hyper, OptimState state);

/// Mean loss over [begin, begin + window) of the history.
double smoothed_loss(const std::vector<LossRecord>& history, std::size_t begin, std::size_t window);

/**
 * Checkpoint layout (little-endian):
 *   "ASTCKPT\0", u32 version=1, u64 iteration, u64 seed,
 *   matcher: u32 mode, i32 patch_radius, i32 window, f64 temperature, i32 d_max, u8 binocular,
 *   tensor doe, tensor doe.m, tensor doe.v,
 *   u32 count=4, then per matcher tensor: value, m, v,
 *   u64 history length, then per record f64 loss, alpha, beta, noise_sigma.
 * A tensor is u32 rows, u32 cols, f64 values row-major.
 */
void save_checkpoint(const std::filesystem::path& path, const OptimState& state);
OptimState load_checkpoint(const std::filesystem::path& path);

/// iteration,loss,alpha,beta,noise_sigma
void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history);
std::vector<LossRecord> read_loss_csv(const std::filesystem::path& path);

// ---- target pattern design ---------------------------------------------------------------------

enum class DesignMethod { Gradient, IterativeFFT };
DesignMethod parse_design_method(const std::string& name);

struct DesignOptions {
  DesignMethod method = DesignMethod::IterativeFFT;
  int iterations = 200;
  std::uint64_t seed = 1;
  double learning_rate = 0.05;
  bool quantize = false;
  std::optional<Gridd> init;  ///< normalized heights; random when absent
};

struct DesignResult {
  DOEProfile<double> doe;
  Gridd normalized;
  Gridd far_field;  ///< final far-field intensity, unit total energy
  /// Per iteration, measured before that iteration's update; entry `iterations` is the final state.
  std::vector<double> amplitude_error;  ///< sum (|F| - sqrt(target))^2
  std::vector<double> intensity_error;  ///< sum (|F|^2 - target)^2
  std::vector<double> correlation;      ///< NCC of |F|^2 and target
};

/// Unit-power far field of a phase-only DOE with normalized heights (uniform amplitude 1/N).
Gridd far_field_intensity(const Gridd& normalized);

DesignResult design_doe_for_target(const Gridd& target, const OpticsConfig& optics, const DesignOptions& options);

// ---- pattern analysis ------------------------------------------------------------------------

struct PatternMetrics {
  int dot_count = 0;          ///< local maxima above 10% of the peak
  double peak_to_mean = 0;
  double gini = 0;
  double top1_energy = 0;     ///< energy fraction in the brightest 1% of samples
};

PatternMetrics pattern_metrics(const Gridd& pattern);

}  // namespace astereo
