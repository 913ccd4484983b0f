#include "astereo/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "astereo/io.hpp"

namespace astereo {

namespace fs = std::filesystem;

// ---- configuration -------------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) throw ConfigError(what + ": expected a number, got '" + text + "'");
  return v;
}

long long parse_int(const std::string& text, const std::string& what) {
  long long v = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ConfigError(what + ": expected an integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text, const std::string& what) {
  if (text == "true" || text == "yes" || text == "1" || text == "on") return true;
  if (text == "false" || text == "no" || text == "0" || text == "off") return false;
  throw ConfigError(what + ": expected true or false, got '" + text + "'");
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item), what));
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

}  // namespace

Range parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    const double v = parse_double(trim(text), "range");
    return Range{v, v};
  }
  const Range r{parse_double(trim(text.substr(0, colon)), "range"), parse_double(trim(text.substr(colon + 1)), "range")};
  if (!(r.lo <= r.hi)) throw ConfigError("range '" + text + "' is empty");
  return r;
}

int auto_d_max(const CameraRig& rig, Eigen::Index width) {
  const auto needed = static_cast<long>(std::ceil(rig.disparity(kMinDepth))) + 1;
  return static_cast<int>(std::clamp<long>(needed, 1, static_cast<long>(width) - 1));
}

fs::path default_output_dir() {
  if (const char* env = std::getenv("ASTEREO_OUT"); env != nullptr && *env != '\0') return fs::path(env);
  return fs::path("out");
}

OpticsConfig RunConfig::optics_for(Eigen::Index n) const {
  OpticsConfig o = optics;
  o.n = n;
  if (!pitch_explicit) o.pitch = beam_diameter / static_cast<double>(n);
  return o;
}

MatcherParams RunConfig::matcher_for(Eigen::Index width) const {
  MatcherParams m = matcher;
  if (m.mode == FeatureMode::LearnedLinear && m.cam.kernels.size() == 0) {
    const MatcherParams ll = MatcherParams::learned_linear(encoder_channels, encoder_ksize, encoder_init_sigma, seed);
    m.cam = ll.cam;
    m.illum = ll.illum;
  }
  if (d_max_auto) m.d_max = auto_d_max(rig, width);
  return m;
}

void RunConfig::validate() const {
  rig.validate();
  if (!(beam_diameter > 0)) throw ConfigError("optics.beam_diameter must be positive");
  if (!(optics.wavelength > 0)) throw ConfigError("optics.wavelength must be positive");
  if (pitch_explicit && !(optics.pitch > 0)) throw ConfigError("optics.pitch must be positive");
  if (optics.levels < 2) throw ConfigError("optics.levels must be >= 2");
  if (optics.zeroth_order < 0 || optics.zeroth_order > 1) throw ConfigError("optics.zeroth_order must lie in [0, 1]");
  if (optics.eta != 0 && !(optics.eta > 1)) throw ConfigError("optics.eta must exceed 1");
  environment.validate();
  if (encoder_channels < 1 || encoder_ksize < 1 || encoder_ksize % 2 == 0) {
    throw ConfigError("matcher.channels must be >= 1 and matcher.ksize odd");
  }
  if (!(encoder_init_sigma >= 0)) throw ConfigError("matcher.init_sigma must be >= 0");
  MatcherParams m = matcher;
  if (m.mode == FeatureMode::LearnedLinear) {
    const MatcherParams ll = MatcherParams::learned_linear(encoder_channels, encoder_ksize, encoder_init_sigma, seed);
    m.cam = ll.cam;
    m.illum = ll.illum;
  }
  m.validate();
  optimizer.validate();
  if (scene_count < 1) throw ConfigError("run.scenes must be >= 1");
}

RunConfig parse_run_config(std::istream& in, const std::string& source) {
  RunConfig c;
  std::optional<std::string> preset;
  std::optional<Range> alpha, beta;
  std::optional<std::vector<double>> noise;
  std::optional<double> gamma;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> keys{
      {"rig.focal", [&](auto& v, auto& w) { c.rig.focal = parse_double(v, w); }},
      {"rig.pixel", [&](auto& v, auto& w) { c.rig.pixel = parse_double(v, w); }},
      {"rig.baseline_wide", [&](auto& v, auto& w) { c.rig.baseline_wide = parse_double(v, w); }},
      {"rig.baseline_narrow", [&](auto& v, auto& w) { c.rig.baseline_narrow = parse_double(v, w); }},
      {"optics.n", [&](auto& v, auto& w) { c.optics.n = parse_int(v, w); }},
      {"optics.pitch",
       [&](auto& v, auto& w) {
         c.optics.pitch = parse_double(v, w);
         c.pitch_explicit = true;
       }},
      {"optics.beam_diameter", [&](auto& v, auto& w) { c.beam_diameter = parse_double(v, w); }},
      {"optics.wavelength", [&](auto& v, auto& w) { c.optics.wavelength = parse_double(v, w); }},
      {"optics.eta", [&](auto& v, auto& w) { c.optics.eta = parse_double(v, w); }},
      {"optics.levels", [&](auto& v, auto& w) { c.optics.levels = static_cast<int>(parse_int(v, w)); }},
      {"optics.circular_aperture", [&](auto& v, auto& w) { c.optics.circular_aperture = parse_bool(v, w); }},
      {"optics.zeroth_order", [&](auto& v, auto& w) { c.optics.zeroth_order = parse_double(v, w); }},
      {"environment.preset", [&](auto& v, auto&) { preset = v; }},
      {"environment.alpha", [&](auto& v, auto&) { alpha = parse_range(v); }},
      {"environment.beta", [&](auto& v, auto&) { beta = parse_range(v); }},
      {"environment.noise_sigma", [&](auto& v, auto& w) { noise = parse_list(v, w); }},
      {"environment.gamma", [&](auto& v, auto& w) { gamma = parse_double(v, w); }},
      {"matcher.mode", [&](auto& v, auto&) { c.matcher.mode = parse_feature_mode(v); }},
      {"matcher.patch_radius", [&](auto& v, auto& w) { c.matcher.patch_radius = static_cast<int>(parse_int(v, w)); }},
      {"matcher.window", [&](auto& v, auto& w) { c.matcher.window = static_cast<int>(parse_int(v, w)); }},
      {"matcher.temperature", [&](auto& v, auto& w) { c.matcher.temperature = parse_double(v, w); }},
      {"matcher.d_max",
       [&](auto& v, auto& w) {
         c.d_max_auto = v == "auto";
         if (!c.d_max_auto) c.matcher.d_max = static_cast<int>(parse_int(v, w));
       }},
      {"matcher.binocular", [&](auto& v, auto& w) { c.matcher.binocular = parse_bool(v, w); }},
      {"matcher.channels", [&](auto& v, auto& w) { c.encoder_channels = static_cast<int>(parse_int(v, w)); }},
      {"matcher.ksize", [&](auto& v, auto& w) { c.encoder_ksize = static_cast<int>(parse_int(v, w)); }},
      {"matcher.init_sigma", [&](auto& v, auto& w) { c.encoder_init_sigma = parse_double(v, w); }},
      {"optimizer.iterations", [&](auto& v, auto& w) { c.optimizer.iterations = static_cast<int>(parse_int(v, w)); }},
      {"optimizer.batch", [&](auto& v, auto& w) { c.optimizer.batch = static_cast<int>(parse_int(v, w)); }},
      {"optimizer.lr_doe", [&](auto& v, auto& w) { c.optimizer.lr_doe = parse_double(v, w); }},
      {"optimizer.lr_matcher", [&](auto& v, auto& w) { c.optimizer.lr_matcher = parse_double(v, w); }},
      {"optimizer.beta1", [&](auto& v, auto& w) { c.optimizer.beta1 = parse_double(v, w); }},
      {"optimizer.beta2", [&](auto& v, auto& w) { c.optimizer.beta2 = parse_double(v, w); }},
      {"optimizer.epsilon", [&](auto& v, auto& w) { c.optimizer.epsilon = parse_double(v, w); }},
      {"optimizer.workers", [&](auto& v, auto& w) { c.optimizer.workers = static_cast<int>(parse_int(v, w)); }},
      {"optimizer.train_doe", [&](auto& v, auto& w) { c.optimizer.train_doe = parse_bool(v, w); }},
      {"optimizer.train_matcher", [&](auto& v, auto& w) { c.optimizer.train_matcher = parse_bool(v, w); }},
      {"run.seed", [&](auto& v, auto& w) { c.seed = static_cast<std::uint64_t>(parse_int(v, w)); }},
      {"run.scenes", [&](auto& v, auto& w) { c.scene_count = static_cast<int>(parse_int(v, w)); }},
      {"run.output_dir", [&](auto& v, auto&) { c.output_dir = v; }},
  };
  const std::set<std::string> sections{"rig", "optics", "environment", "matcher", "optimizer", "run"};

  std::string line, section;
  std::set<std::string> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    if (const auto hash = line.find_first_of("#;"); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside of a section");
    const std::string key = section + "." + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    if (value.empty()) throw ConfigError(where + ": empty value for '" + key + "'");
    it->second(value, where + " " + key);
  }

  c.environment = EnvironmentPreset::from_name(preset.value_or("indoor"));
  if (alpha || beta || noise || gamma) {
    if (alpha) c.environment.alpha = *alpha;
    if (beta) c.environment.beta = *beta;
    if (noise) c.environment.noise_sigma = *noise;
    if (gamma) c.environment.gamma = *gamma;
    if (preset.value_or("") != "custom") c.environment.name = preset.value_or("indoor") + "+overrides";
  }
  c.validate();
  return c;
}

RunConfig read_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_run_config(in, path.string());
}

// ---- evaluation ------------------------------------------------------------------------------------

SceneEval compute_eval(const Gridd& est, const Gridd& gt, const Gridd& mask, const CameraRig& rig,
                       const std::vector<double>& thresholds, std::string name) {
  require_same_shape(est, gt, "compute_eval");
  require_same_shape(mask, gt, "compute_eval mask");
  SceneEval e;
  e.name = std::move(name);
  e.thresholds = thresholds;
  e.bad.assign(thresholds.size(), 0.0);
  e.total = static_cast<long>(gt.size());
  double abs_sum = 0, depth_sum = 0;
  std::vector<long> bad(thresholds.size(), 0);
  for (Eigen::Index i = 0; i < gt.size(); ++i) {
    if (mask(i) == 0 || !std::isfinite(gt(i)) || !std::isfinite(est(i))) continue;
    ++e.valid;
    const double err = std::abs(est(i) - gt(i));
    abs_sum += err;
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      if (err > thresholds[k]) ++bad[k];
    }
    if (est(i) > kDepthGuard && gt(i) > kDepthGuard) {
      ++e.depth_valid;
      depth_sum += std::abs(rig.depth(est(i)) - rig.depth(gt(i)));
    }
  }
  if (e.valid == 0) {
    e.degenerate = true;
    return e;
  }
  e.mae = abs_sum / static_cast<double>(e.valid);
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    e.bad[k] = static_cast<double>(bad[k]) / static_cast<double>(e.valid);
  }
  e.depth_mae = e.depth_valid > 0 ? depth_sum / static_cast<double>(e.depth_valid) : 0.0;
  return e;
}

EvalReport aggregate_eval(std::vector<SceneEval> scenes) {
  std::sort(scenes.begin(), scenes.end(), [](const SceneEval& a, const SceneEval& b) {
    return std::tie(a.name, a.mae, a.valid, a.depth_mae) < std::tie(b.name, b.mae, b.valid, b.depth_mae);
  });
  EvalReport r;
  SceneEval& agg = r.aggregate;
  agg.name = "aggregate";
  if (!scenes.empty()) agg.thresholds = scenes.front().thresholds;
  agg.bad.assign(agg.thresholds.size(), 0.0);
  double mae = 0, depth = 0;
  for (const SceneEval& s : scenes) {
    if (s.thresholds != agg.thresholds) throw ContractError("aggregate_eval: scenes use different thresholds");
    agg.total += s.total;
    if (s.degenerate) continue;
    const auto wv = static_cast<double>(s.valid);
    agg.valid += s.valid;
    agg.depth_valid += s.depth_valid;
    mae += s.mae * wv;
    depth += s.depth_mae * static_cast<double>(s.depth_valid);
    for (std::size_t k = 0; k < s.bad.size(); ++k) agg.bad[k] += s.bad[k] * wv;
  }
  if (agg.valid == 0) {
    agg.degenerate = true;
  } else {
    const auto wv = static_cast<double>(agg.valid);
    agg.mae = mae / wv;
    for (double& b : agg.bad) b /= wv;
    agg.depth_mae = agg.depth_valid > 0 ? depth / static_cast<double>(agg.depth_valid) : 0.0;
  }
  r.scenes = std::move(scenes);
  return r;
}

namespace {

std::string threshold_label(double t) {
  std::ostringstream ss;
  ss << t;
  return ss.str();
}

void eval_row(std::ostream& out, const SceneEval& s) {
  out << s.name << ',' << s.mae << ',' << s.depth_mae;
  for (double b : s.bad) out << ',' << b;
  out << ',' << s.valid_fraction() << ',' << s.valid << ',' << (s.degenerate ? 1 : 0) << '\n';
}

}  // namespace

void write_eval_text(std::ostream& out, const EvalReport& report) {
  auto line = [&](const SceneEval& s) {
    out << std::left << std::setw(16) << s.name << std::right;
    if (s.degenerate) {
      out << "  degenerate (no valid pixels)\n";
      return;
    }
    out << "  mae " << std::fixed << std::setprecision(4) << s.mae << " px  depth " << s.depth_mae * 100 << " cm";
    for (std::size_t k = 0; k < s.bad.size(); ++k) out << "  bad>" << threshold_label(s.thresholds[k]) << " " << s.bad[k];
    out << "  valid " << s.valid_fraction() << '\n' << std::defaultfloat;
  };
  for (const SceneEval& s : report.scenes) line(s);
  line(report.aggregate);
  if (report.pattern) {
    const PatternMetrics& m = *report.pattern;
    out << "pattern  dots " << m.dot_count << "  peak/mean " << m.peak_to_mean << "  gini " << m.gini << "  top1% "
        << m.top1_energy << '\n';
  }
}

void write_eval_csv(const fs::path& path, const EvalReport& report) {
  io::ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "scene,mae_px,depth_mae_m";
  for (double t : report.aggregate.thresholds) out << ",bad_" << threshold_label(t);
  out << ",valid_fraction,valid_pixels,degenerate\n" << std::setprecision(17);
  for (const SceneEval& s : report.scenes) eval_row(out, s);
  eval_row(out, report.aggregate);
}

// ---- reference scenes ------------------------------------------------------------------------------

SceneSample plane_scene(Eigen::Index n, double depth, const CameraRig& rig, double reflectance) {
  SceneDescriptor d;
  d.rows = d.cols = n;
  d.background_z = depth;
  d.background_reflectance = reflectance;
  d.rects.push_back(SceneRect{0, 0, 0, 0, depth, depth, reflectance});
  SceneSample s = generate_toy_scene(d, rig);
  s.name = "plane";
  return s;
}

SceneSample toy_training_scene(Eigen::Index n, std::uint64_t seed, const CameraRig& rig) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  const double k = static_cast<double>(n) / 32.0;
  SceneDescriptor d;
  d.rows = d.cols = n;
  d.background_z = 1.5 + 1.0 * u(rng);
  d.background_reflectance = 0.3 + 0.4 * u(rng);
  const double x0 = k * (8 + 10 * u(rng));
  const double y0 = k * 4 * u(rng);
  const double z0 = 0.5 + 0.4 * u(rng);
  const double z1 = 0.5 + 0.4 * u(rng);
  const double refl = 0.3 + 0.5 * u(rng);
  d.rects.push_back(SceneRect{x0, y0, x0 + 10 * k, y0 + 20 * k, z0, z1, refl});
  SceneSample s = generate_toy_scene(d, rig);
  s.name = "toy" + std::to_string(seed);
  return s;
}

std::vector<SceneSample> toy_training_set(int count, Eigen::Index n, std::uint64_t seed, const CameraRig& rig) {
  std::vector<SceneSample> out;
  for (int i = 0; i < count; ++i) out.push_back(toy_training_scene(n, seed + static_cast<std::uint64_t>(i), rig));
  return out;
}

SceneSample occlusion_scene(Eigen::Index n, std::uint64_t seed, const CameraRig& rig) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  const double k = static_cast<double>(n) / 128.0;
  SceneDescriptor d;
  d.rows = d.cols = n;
  d.background_z = 2.0 + u(rng);
  d.background_reflectance = 0.3 + 0.4 * u(rng);
  const double x0 = k * (70 + 20 * u(rng));
  const double y0 = k * 20 * u(rng);
  const double z0 = 1.0 + 0.4 * u(rng);
  const double z1 = 1.0 + 0.4 * u(rng);
  const double refl = 0.3 + 0.5 * u(rng);
  d.rects.push_back(SceneRect{x0, y0, x0 + 30 * k, y0 + 80 * k, z0, z1, refl});
  SceneSample s = generate_toy_scene(d, rig);
  s.name = "occlusion" + std::to_string(seed);
  return s;
}

Gridd occlusion_band(const SceneSample& s) {
  Gridd band = Gridd::Zero(s.rows(), s.cols());
  const Eigen::Index w = s.cols();
  for (Eigen::Index y = 0; y < s.rows(); ++y) {
    for (Eigen::Index x = 0; x + 1 < w; ++x) {
      const double jump = std::abs(s.disp_L(y, x + 1) - s.disp_L(y, x));
      if (jump <= 1) continue;
      const auto r = static_cast<Eigen::Index>(std::ceil(jump));
      for (Eigen::Index i = std::max<Eigen::Index>(0, x - r); i <= std::min(w - 1, x + 1 + r); ++i) band(y, i) = 1;
    }
  }
  return band * s.occ_L;
}

CameraRig training_rig() { return CameraRig::centered(6e-3, 5.3e-6, 5e-3); }

RunConfig reference_config(const std::string& name) {
  RunConfig c;
  c.rig = training_rig();
  c.optics.n = 32;
  c.optics.eta = 1.5;
  c.beam_diameter = 1e-3;
  c.optics.pitch = c.beam_diameter / 32;
  c.matcher.mode = FeatureMode::LearnedLinear;
  c.matcher.d_max = 16;
  c.d_max_auto = false;
  c.encoder_channels = 4;
  c.encoder_ksize = 3;
  c.encoder_init_sigma = 0.1;
  c.optimizer.iterations = 200;
  c.optimizer.lr_doe = 0.02;
  c.optimizer.lr_matcher = 0.01;
  c.seed = 1;
  c.scene_count = 5;
  if (name == "indoor" || name == "outdoor" || name == "generic") {
    c.environment = EnvironmentPreset::from_name(name);
  } else if (name == "noise-low" || name == "noise-high") {
    c.environment = EnvironmentPreset::indoor();
    c.environment.name = name;
    c.environment.noise_sigma = {name == "noise-low" ? 0.02 : 0.6};
  } else {
    throw ConfigError("unknown reference run '" + name + "' (indoor | outdoor | generic | noise-low | noise-high)");
  }
  return c;
}

namespace {
constexpr std::uint64_t kTrainingSceneSeed = 200;
}

ReferenceRun run_optimization(const RunConfig& config) {
  config.validate();
  ReferenceRun run;
  run.config = config;
  const Eigen::Index n = config.optics.n;
  const OpticsConfig optics = config.optics_for(n);
  run.dataset = toy_training_set(config.scene_count, n, kTrainingSceneSeed, config.rig);
  OptimState init = initial_state(optics, config.matcher_for(n), config.seed);
  run.state = joint_optimize(run.dataset, config.rig, optics, config.environment, config.optimizer, std::move(init));
  return run;
}

Gridd checkpoint_pattern(const OptimState& state, const RunConfig& config) {
  const OpticsConfig optics = config.optics_for(state.doe.rows());
  return pattern_from_normalized(state.doe, optics, config.rig).intensity;
}

std::vector<OcclusionComparison> compare_trinocular(const ComparisonSettings& st, const fs::path& map_dir) {
  const CameraRig rig;
  const double pitch = 1e-3 / static_cast<double>(st.size);
  const auto doe = random_doe<double>(st.size, st.eta, 16, pitch, 850e-9, st.doe_seed);
  const auto pattern = simulate_pattern(doe, rig);
  MatcherParams params;
  params.d_max = auto_d_max(rig, st.size);
  std::vector<OcclusionComparison> out;
  for (int i = 0; i < st.scenes; ++i) {
    const SceneSample s = occlusion_scene(st.size, st.seed + static_cast<std::uint64_t>(i), rig);
    CaptureConfig cap;
    cap.noise_sigma = st.noise_sigma;
    cap.rng_seed = 1000 + static_cast<std::uint64_t>(i);
    const StereoCapture c = synthesize_stereo(pattern, s, rig, cap);
    const Gridd band = occlusion_band(s);
    OcclusionComparison row;
    row.scene = s.name;
    row.band_pixels = static_cast<long>(band.sum());
    for (bool binocular : {false, true}) {
      params.binocular = binocular;
      const Gridd est = reconstruct(c.left, c.right, c.illum, params, rig);
      const double mae = row.band_pixels > 0 ? ((est - s.disp_L).abs() * band).sum() / band.sum() : 0.0;
      (binocular ? row.binocular_mae : row.trinocular_mae) = mae;
      if (!map_dir.empty() && i == 0) {
        const std::string tag = binocular ? "binocular" : "trinocular";
        io::write_colormap_ppm(map_dir / ("fig5_" + tag + "_error.ppm"), (est - s.disp_L).abs() * s.occ_L, 0.0, 8.0);
        io::write_pfm(map_dir / ("fig5_" + tag + "_disparity.pfm"), est);
      }
    }
    if (!map_dir.empty() && i == 0) io::write_mask_pgm(map_dir / "fig5_band.pgm", band);
    out.push_back(row);
  }
  return out;
}

DesignBenchmark design_benchmark(Eigen::Index n, int iterations, std::uint64_t seed) {
  OpticsConfig optics;
  optics.n = n;
  optics.pitch = 1e-3 / static_cast<double>(n);
  optics.eta = 1.5;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Gridd source(n, n);
  for (Eigen::Index i = 0; i < source.size(); ++i) source(i) = u(rng);
  const Gridd target = far_field_intensity(source);
  DesignOptions opts;
  opts.iterations = iterations;
  opts.seed = seed + 1;
  opts.method = DesignMethod::IterativeFFT;
  DesignResult ifft = design_doe_for_target(target, optics, opts);
  opts.method = DesignMethod::Gradient;
  return DesignBenchmark{std::move(ifft), design_doe_for_target(target, optics, opts)};
}

// ---- figures ---------------------------------------------------------------------------------------

namespace {

/// Patterns side by side, each scaled to its own peak, separated by a dark gutter.
Gridd tile(const std::vector<Gridd>& images) {
  Eigen::Index h = 0, w = 0;
  for (const Gridd& g : images) {
    h = std::max(h, g.rows());
    w += g.cols() + 2;
  }
  Gridd out = Gridd::Zero(h, w > 0 ? w - 2 : 0);
  Eigen::Index x = 0;
  for (const Gridd& g : images) {
    const double peak = g.maxCoeff();
    out.block(0, x, g.rows(), g.cols()) = peak > 0 ? Gridd(g / peak) : g;
    x += g.cols() + 2;
  }
  return out;
}

/// Log-scale line plot of up to three series on a white canvas, 8-bit gray.
Gridd line_plot(const std::vector<std::vector<double>>& series, Eigen::Index h = 160, Eigen::Index w = 320) {
  Gridd img = Gridd::Ones(h, w);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t len = 0;
  for (const auto& s : series) {
    len = std::max(len, s.size());
    for (double v : s) {
      if (v > 0) {
        lo = std::min(lo, std::log10(v));
        hi = std::max(hi, std::log10(v));
      }
    }
  }
  if (len < 2 || !(hi > lo)) return img;
  const double shades[] = {0.0, 0.35, 0.6};
  for (std::size_t k = 0; k < series.size(); ++k) {
    for (std::size_t i = 0; i < series[k].size(); ++i) {
      const double v = series[k][i];
      if (!(v > 0)) continue;
      const auto x = static_cast<Eigen::Index>(std::lround(static_cast<double>(i) * static_cast<double>(w - 1) /
                                                           static_cast<double>(len - 1)));
      const auto y = static_cast<Eigen::Index>(std::lround((hi - std::log10(v)) / (hi - lo) * static_cast<double>(h - 1)));
      img(y, x) = shades[k % 3];
      if (y + 1 < h) img(y + 1, x) = shades[k % 3];
    }
  }
  return img;
}

OptimState require_checkpoint(const fs::path& dir, const std::string& name) {
  const fs::path p = dir / (name + ".ckpt");
  if (!fs::exists(p)) {
    throw IoError("missing checkpoint " + p.string() + "; produce it with: astereo optimize --reference " + name +
                  " --checkpoint " + p.string());
  }
  return load_checkpoint(p);
}

void metrics_header(std::ostream& out) { out << "pattern,dot_count,peak_to_mean,gini,top1_energy\n"; }

void metrics_row(std::ostream& out, const std::string& name, const PatternMetrics& m) {
  out << name << ',' << m.dot_count << ',' << m.peak_to_mean << ',' << m.gini << ',' << m.top1_energy << '\n';
}

std::vector<fs::path> pattern_pair_figure(const std::string& fig, const fs::path& outdir, const fs::path& ckdir,
                                          const std::string& a, const std::string& b) {
  std::vector<Gridd> patterns;
  fs::create_directories(outdir);
  std::ofstream csv(outdir / (fig + "_metrics.csv"));
  csv << std::setprecision(17);
  metrics_header(csv);
  std::vector<fs::path> files{outdir / (fig + "_metrics.csv")};
  for (const std::string& name : {a, b}) {
    const OptimState st = require_checkpoint(ckdir, name);
    const Gridd p = checkpoint_pattern(st, reference_config(name));
    metrics_row(csv, name, pattern_metrics(p));
    io::write_pfm(outdir / (fig + "_" + name + ".pfm"), p);
    files.push_back(outdir / (fig + "_" + name + ".pfm"));
    patterns.push_back(p);
  }
  io::write_pgm8(outdir / (fig + "_patterns.pgm"), tile(patterns), 0.0, 1.0);
  files.push_back(outdir / (fig + "_patterns.pgm"));
  return files;
}

std::vector<fs::path> figure4(const fs::path& outdir, const fs::path& ckdir) {
  const OptimState indoor = require_checkpoint(ckdir, "indoor");
  const RunConfig cfg = reference_config("indoor");
  const OpticsConfig optics = cfg.optics_for(cfg.optics.n);
  const Eigen::Index n = optics.n;

  // a pseudo-random dot lattice target, the kind of pattern fixed-design projectors emit
  Gridd dots = Gridd::Zero(n, n);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  for (int i = 0; i < static_cast<int>(n * n / 16); ++i) dots(pick(rng), pick(rng)) = 1.0;
  DesignOptions dopts;
  dopts.iterations = 200;
  const DesignResult designed = design_doe_for_target(dots, optics, dopts);

  std::mt19937_64 rr(9);
  std::uniform_real_distribution<double> u(0, 1);
  Gridd random(n, n);
  for (Eigen::Index i = 0; i < random.size(); ++i) random(i) = u(rr);

  const std::vector<std::pair<std::string, Gridd>> doe{
      {"random", random}, {"dot_lattice", designed.normalized}, {"optimized_indoor", indoor.doe}};
  const std::vector<SceneSample> scenes = toy_training_set(cfg.scene_count, n, kTrainingSceneSeed, cfg.rig);
  MatcherParams patch;
  patch.d_max = cfg.matcher.d_max;

  fs::create_directories(outdir);
  std::ofstream csv(outdir / "fig4_comparison.csv");
  csv << std::setprecision(17) << "pattern,mae_patch_matcher,mae_learned_matcher,dot_count,peak_to_mean,gini,top1_energy\n";
  std::vector<Gridd> images;
  for (const auto& [name, t] : doe) {
    const auto pattern = pattern_from_normalized(t, optics, cfg.rig);
    double mae_patch = 0, mae_learned = 0;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      CaptureConfig env;
      env.beta = 1.5;
      env.noise_sigma = 0.02;
      env.rng_seed = 77 + i;
      const StereoCapture c = synthesize_stereo(pattern, scenes[i], cfg.rig, env);
      const Gridd mask = supervision_mask(scenes[i]);
      auto mae = [&](const Gridd& est) { return ((est - scenes[i].disp_L).abs() * mask).sum() / mask.sum(); };
      mae_patch += mae(reconstruct(c.left, c.right, c.illum, patch, cfg.rig));
      mae_learned += mae(reconstruct(c.left, c.right, c.illum, indoor.matcher, cfg.rig));
    }
    const auto k = static_cast<double>(scenes.size());
    const PatternMetrics m = pattern_metrics(pattern.intensity);
    csv << name << ',' << mae_patch / k << ',' << mae_learned / k << ',' << m.dot_count << ',' << m.peak_to_mean << ','
        << m.gini << ',' << m.top1_energy << '\n';
    images.push_back(pattern.intensity);
  }
  io::write_pgm8(outdir / "fig4_patterns.pgm", tile(images), 0.0, 1.0);
  return {outdir / "fig4_comparison.csv", outdir / "fig4_patterns.pgm"};
}

std::vector<fs::path> figure5(const fs::path& outdir) {
  fs::create_directories(outdir);
  const auto rows = compare_trinocular(ComparisonSettings{}, outdir);
  std::ofstream csv(outdir / "fig5_occlusion.csv");
  csv << std::setprecision(17) << "scene,trinocular_band_mae,binocular_band_mae,band_pixels\n";
  for (const auto& r : rows) csv << r.scene << ',' << r.trinocular_mae << ',' << r.binocular_mae << ',' << r.band_pixels << '\n';
  return {outdir / "fig5_occlusion.csv", outdir / "fig5_trinocular_error.ppm", outdir / "fig5_binocular_error.ppm"};
}

std::vector<fs::path> figure8(const fs::path& outdir) {
  fs::create_directories(outdir);
  const DesignBenchmark b = design_benchmark();
  std::ofstream csv(outdir / "fig8_convergence.csv");
  csv << std::setprecision(17)
      << "iteration,ifft_amplitude_error,ifft_intensity_error,ifft_correlation,gradient_amplitude_error,"
         "gradient_intensity_error,gradient_correlation\n";
  for (std::size_t i = 0; i < b.iterative_fft.amplitude_error.size(); ++i) {
    csv << i << ',' << b.iterative_fft.amplitude_error[i] << ',' << b.iterative_fft.intensity_error[i] << ','
        << b.iterative_fft.correlation[i] << ',' << b.gradient.amplitude_error[i] << ','
        << b.gradient.intensity_error[i] << ',' << b.gradient.correlation[i] << '\n';
  }
  io::write_pgm8(outdir / "fig8_convergence.pgm",
                 line_plot({b.iterative_fft.amplitude_error, b.gradient.amplitude_error}), 0.0, 1.0);
  io::write_pgm8(outdir / "fig8_far_fields.pgm", tile({b.iterative_fft.far_field, b.gradient.far_field}), 0.0, 1.0);
  return {outdir / "fig8_convergence.csv", outdir / "fig8_convergence.pgm", outdir / "fig8_far_fields.pgm"};
}

}  // namespace

std::vector<fs::path> reproduce_figures(const std::string& which, const fs::path& outdir, const fs::path& ckdir) {
  if (which == "fig4") return figure4(outdir, ckdir);
  if (which == "fig5") return figure5(outdir);
  if (which == "fig6") return pattern_pair_figure("fig6", outdir, ckdir, "indoor", "outdoor");
  if (which == "fig7") return pattern_pair_figure("fig7", outdir, ckdir, "noise-low", "noise-high");
  if (which == "fig8") return figure8(outdir);
  if (which == "all") {
    std::vector<fs::path> all;
    for (const char* f : {"fig5", "fig8", "fig6", "fig7", "fig4"}) {
      auto part = reproduce_figures(f, outdir, ckdir);
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  throw ConfigError("unknown figure '" + which + "' (fig4 | fig5 | fig6 | fig7 | fig8 | all)");
}

}  // namespace astereo
