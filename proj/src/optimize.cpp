#include "astereo/optimize.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "astereo/fft.hpp"
#include "astereo/io.hpp"

namespace astereo {

// ---- environments ----------------------------------------------------------------------------------

EnvironmentPreset EnvironmentPreset::indoor() {
  EnvironmentPreset p;
  p.name = "indoor";
  p.alpha = {0.0, 0.0};
  p.beta = {1.5, 1.5};
  return p;
}

EnvironmentPreset EnvironmentPreset::outdoor() {
  EnvironmentPreset p;
  p.name = "outdoor";
  p.alpha = {0.5, 0.5};
  p.beta = {0.2, 0.2};
  return p;
}

EnvironmentPreset EnvironmentPreset::generic() {
  EnvironmentPreset p;
  p.name = "generic";
  p.alpha = {0.0, 0.5};
  p.beta = {0.2, 1.5};
  return p;
}

EnvironmentPreset EnvironmentPreset::from_name(const std::string& name) {
  if (name == "indoor") return indoor();
  if (name == "outdoor") return outdoor();
  if (name == "generic") return generic();
  if (name == "custom") return EnvironmentPreset{};
  throw ConfigError("unknown environment preset '" + name + "' (indoor | outdoor | generic | custom)");
}

void EnvironmentPreset::validate() const {
  if (!(alpha.lo <= alpha.hi) || !(beta.lo <= beta.hi)) throw ConfigError("environment: empty alpha or beta range");
  if (alpha.lo < 0 || beta.lo < 0) throw ConfigError("environment: alpha and beta must be nonnegative");
  if (noise_sigma.empty()) throw ConfigError("environment: noise_sigma set is empty");
  for (double s : noise_sigma) {
    if (!(s >= 0) || !std::isfinite(s)) throw ConfigError("environment: noise_sigma must be finite and >= 0");
  }
  if (!(gamma > 0)) throw ConfigError("environment: gamma must be positive");
}

namespace {

double draw(const Range& r, std::mt19937_64& rng) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

}  // namespace

CaptureConfig EnvironmentPreset::sample(std::mt19937_64& rng) const {
  CaptureConfig c;
  c.gamma = gamma;
  c.alpha = draw(alpha, rng);
  c.beta = draw(beta, rng);
  c.noise_sigma = noise_sigma.size() == 1
                      ? noise_sigma.front()
                      : noise_sigma[std::uniform_int_distribution<std::size_t>(0, noise_sigma.size() - 1)(rng)];
  c.rng_seed = rng();
  return c;
}

void OptimHyper::validate() const {
  if (iterations < 0) throw ConfigError("optimizer: iterations must be >= 0");
  if (batch < 1) throw ConfigError("optimizer: batch must be >= 1");
  if (!(lr_doe >= 0) || !(lr_matcher >= 0)) throw ConfigError("optimizer: learning rates must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("optimizer: betas must lie in [0, 1)");
  if (!(epsilon > 0)) throw ConfigError("optimizer: epsilon must be positive");
  if (workers < 1) throw ConfigError("optimizer: workers must be >= 1");
}

// ---- joint optimization ------------------------------------------------------------------------------

namespace {

AdamMoments zero_moments(const Gridd& like) {
  return AdamMoments{Gridd::Zero(like.rows(), like.cols()), Gridd::Zero(like.rows(), like.cols())};
}

void adam_step(Gridd& x, AdamMoments& mom, const Gridd& g, double lr, const OptimHyper& h, std::uint64_t t) {
  mom.m = h.beta1 * mom.m + (1 - h.beta1) * g;
  mom.v = h.beta2 * mom.v + (1 - h.beta2) * g.square();
  const double c1 = 1 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1 - std::pow(h.beta2, static_cast<double>(t));
  x -= lr * (mom.m / c1) / ((mom.v / c2).sqrt() + h.epsilon);
}

std::mt19937_64 iteration_rng(std::uint64_t seed, std::uint64_t iteration) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(iteration >> 32), 0x6a09e667u};
  return std::mt19937_64(seq);
}

struct Member {
  std::size_t scene = 0;
  std::uint64_t noise_seed = 0;
};

struct MemberResult {
  double loss = 0;
  Gridd g_doe;
  std::vector<Gridd> g_matcher;
};

MemberResult run_member(const Gridd& doe, const MatcherParams& matcher, bool matcher_leaves, const SceneSample& scene,
                        const Gridd& mask, CaptureConfig env, const CameraRig& rig, const OpticsConfig& optics) {
  diff::Tape tape;
  std::vector<diff::Var> leaves{tape.leaf(doe)};
  MatcherLeaves ml;
  if (matcher_leaves) {
    ml = record_matcher_leaves(tape, matcher);
    leaves.insert(leaves.end(), {ml.cam_kernels, ml.cam_bias, ml.illum_kernels, ml.illum_bias});
  }
  const NoisePair noise = draw_noise(scene.rows(), scene.cols(), env);
  const PipelineVars v =
      forward_pipeline(leaves.front(), scene, env, noise, matcher, matcher_leaves ? &ml : nullptr, rig, optics, mask);
  MemberResult r;
  r.loss = v.loss.value()(0, 0);
  std::vector<Gridd> grads = tape.backward(v.loss, leaves);
  r.g_doe = std::move(grads.front());
  r.g_matcher.assign(std::make_move_iterator(grads.begin() + 1), std::make_move_iterator(grads.end()));
  return r;
}

void dump_failure(const std::filesystem::path& dir, const OptimState& state, const std::vector<Member>& batch,
                  const std::vector<SceneSample>& dataset, const CaptureConfig& env, const std::vector<double>& losses) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  io::write_pfm(dir / "doe_snapshot.pfm", state.doe);
  std::ofstream out(dir / "failure.txt");
  out << std::setprecision(17);
  out << "iteration " << state.iteration << "\nseed " << state.seed << "\n";
  out << "alpha " << env.alpha << "\nbeta " << env.beta << "\nnoise_sigma " << env.noise_sigma << "\n";
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const SceneSample& s = dataset[batch[i].scene];
    out << "member " << i << " scene " << batch[i].scene << " '" << s.name << "' noise_seed " << batch[i].noise_seed
        << " loss " << losses[i] << "\n";
    io::write_pfm(dir / ("batch" + std::to_string(i) + "_disp_L.pfm"), s.disp_L);
  }
}

}  // namespace

OptimState initial_state(const OpticsConfig& optics, const MatcherParams& matcher, std::uint64_t seed) {
  optics.validate();
  matcher.validate();
  OptimState s;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  s.doe.resize(optics.n, optics.n);
  for (Eigen::Index i = 0; i < s.doe.size(); ++i) s.doe(i) = uni(rng);
  s.doe_moments = zero_moments(s.doe);
  s.matcher = matcher;
  for (const Gridd* g : {&matcher.cam.kernels, &matcher.cam.bias, &matcher.illum.kernels, &matcher.illum.bias}) {
    s.matcher_moments.push_back(zero_moments(*g));
  }
  s.seed = seed;
  return s;
}

OptimState joint_optimize(const std::vector<SceneSample>& dataset, const CameraRig& rig, const OpticsConfig& optics,
                          const EnvironmentPreset& preset, const OptimHyper& hyper, OptimState state) {
  if (dataset.empty()) throw ConfigError("joint_optimize: dataset is empty");
  hyper.validate();
  preset.validate();
  optics.validate();
  rig.validate();
  state.matcher.validate();
  if (state.doe.rows() != optics.n || state.doe.cols() != optics.n) {
    throw ShapeError("joint_optimize: DOE state does not match the optics grid");
  }
  if (state.history.size() != state.iteration) throw ContractError("joint_optimize: history length != iteration");
  for (const SceneSample& s : dataset) {
    s.validate();
    if (s.rows() != optics.n || s.cols() != optics.n) {
      throw ShapeError("joint_optimize: scene '" + s.name + "' does not match the " + std::to_string(optics.n) +
                       "x" + std::to_string(optics.n) + " pattern grid");
    }
  }
  std::vector<Gridd> masks;
  masks.reserve(dataset.size());
  for (const SceneSample& s : dataset) masks.push_back(supervision_mask(s));

  const bool learn_matcher = state.matcher.mode == FeatureMode::LearnedLinear;
  std::array<Gridd*, 4> mparams{&state.matcher.cam.kernels, &state.matcher.cam.bias, &state.matcher.illum.kernels,
                                &state.matcher.illum.bias};

  while (state.iteration < static_cast<std::uint64_t>(hyper.iterations)) {
    std::mt19937_64 rng = iteration_rng(state.seed, state.iteration);
    const CaptureConfig env = preset.sample(rng);
    std::vector<Member> batch(static_cast<std::size_t>(hyper.batch));
    std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
    for (Member& m : batch) {
      m.scene = pick(rng);
      m.noise_seed = rng();
    }

    auto run = [&](std::size_t i) {
      CaptureConfig e = env;
      e.rng_seed = batch[i].noise_seed;
      return run_member(state.doe, state.matcher, learn_matcher, dataset[batch[i].scene], masks[batch[i].scene], e, rig,
                        optics);
    };
    std::vector<MemberResult> results(batch.size());
    if (hyper.workers > 1 && batch.size() > 1) {
      std::vector<std::future<MemberResult>> futures;
      for (std::size_t start = 0; start < batch.size(); start += static_cast<std::size_t>(hyper.workers)) {
        futures.clear();
        const std::size_t stop = std::min(batch.size(), start + static_cast<std::size_t>(hyper.workers));
        for (std::size_t i = start; i < stop; ++i) futures.push_back(std::async(std::launch::async, run, i));
        for (std::size_t i = start; i < stop; ++i) results[i] = futures[i - start].get();
      }
    } else {
      for (std::size_t i = 0; i < batch.size(); ++i) results[i] = run(i);
    }

    // ordered reduction
    const double inv = 1.0 / static_cast<double>(batch.size());
    double loss = 0;
    Gridd g_doe = Gridd::Zero(state.doe.rows(), state.doe.cols());
    std::vector<Gridd> g_m;
    for (Gridd* p : mparams) g_m.push_back(Gridd::Zero(p->rows(), p->cols()));
    std::vector<double> losses;
    for (const MemberResult& r : results) {
      losses.push_back(r.loss);
      loss += r.loss * inv;
      g_doe += r.g_doe * inv;
      for (std::size_t k = 0; k < r.g_matcher.size(); ++k) g_m[k] += r.g_matcher[k] * inv;
    }
    bool finite = std::isfinite(loss) && all_finite(g_doe);
    for (const Gridd& g : g_m) finite = finite && all_finite(g);
    if (!finite) {
      dump_failure(hyper.dump_dir, state, batch, dataset, env, losses);
      throw NumericError("joint_optimize: non-finite loss or gradient at iteration " + std::to_string(state.iteration) +
                         (hyper.dump_dir.empty() ? std::string() : " (diagnostics in " + hyper.dump_dir.string() + ")"));
    }

    const std::uint64_t t = state.iteration + 1;
    if (hyper.train_doe) {
      adam_step(state.doe, state.doe_moments, g_doe, hyper.lr_doe, hyper, t);
      state.doe -= state.doe.floor();
      state.doe = state.doe.unaryExpr([](double x) { return x >= 1.0 ? 0.0 : x; });
    }
    if (learn_matcher && hyper.train_matcher) {
      for (std::size_t k = 0; k < mparams.size(); ++k) {
        adam_step(*mparams[k], state.matcher_moments[k], g_m[k], hyper.lr_matcher, hyper, t);
      }
    }
    state.history.push_back(LossRecord{loss, env.alpha, env.beta, env.noise_sigma});
    state.iteration = t;
  }
  return state;
}

double smoothed_loss(const std::vector<LossRecord>& history, std::size_t begin, std::size_t window) {
  if (window == 0 || begin + window > history.size()) throw RangeError("smoothed_loss: window outside the history");
  double s = 0;
  for (std::size_t i = begin; i < begin + window; ++i) s += history[i].loss;
  return s / static_cast<double>(window);
}

// ---- checkpoints -------------------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'A', 'S', 'T', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError("checkpoint: truncated file");
  return v;
}

void put_tensor(std::ostream& out, const Gridd& g) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(g.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(g.cols()));
  out.write(reinterpret_cast<const char*>(g.data()), static_cast<std::streamsize>(g.size() * sizeof(double)));
}

Gridd get_tensor(std::istream& in) {
  const auto rows = get<std::uint32_t>(in);
  const auto cols = get<std::uint32_t>(in);
  if (static_cast<std::uint64_t>(rows) * cols > (1ULL << 28)) throw FormatError("checkpoint: implausible tensor size");
  Gridd g(rows, cols);
  in.read(reinterpret_cast<char*>(g.data()), static_cast<std::streamsize>(g.size() * sizeof(double)));
  if (!in) throw FormatError("checkpoint: truncated tensor");
  return g;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const OptimState& state) {
  if (state.matcher_moments.size() != 4) throw ContractError("save_checkpoint: expected 4 matcher moment buffers");
  io::ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put(out, kCheckpointVersion);
  put<std::uint64_t>(out, state.iteration);
  put<std::uint64_t>(out, state.seed);
  const MatcherParams& m = state.matcher;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.mode));
  put<std::int32_t>(out, m.patch_radius);
  put<std::int32_t>(out, m.window);
  put<double>(out, m.temperature);
  put<std::int32_t>(out, m.d_max);
  put<std::uint8_t>(out, m.binocular ? 1 : 0);
  put_tensor(out, state.doe);
  put_tensor(out, state.doe_moments.m);
  put_tensor(out, state.doe_moments.v);
  put<std::uint32_t>(out, 4);
  const std::array<const Gridd*, 4> values{&m.cam.kernels, &m.cam.bias, &m.illum.kernels, &m.illum.bias};
  for (std::size_t k = 0; k < 4; ++k) {
    put_tensor(out, *values[k]);
    put_tensor(out, state.matcher_moments[k].m);
    put_tensor(out, state.matcher_moments[k].v);
  }
  put<std::uint64_t>(out, state.history.size());
  for (const LossRecord& r : state.history) {
    put(out, r.loss);
    put(out, r.alpha);
    put(out, r.beta);
    put(out, r.noise_sigma);
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

OptimState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw FormatError(path.string() + ": not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  OptimState s;
  s.iteration = get<std::uint64_t>(in);
  s.seed = get<std::uint64_t>(in);
  MatcherParams& m = s.matcher;
  const auto mode = get<std::uint32_t>(in);
  if (mode > 2) throw FormatError("checkpoint: bad matcher mode");
  m.mode = static_cast<FeatureMode>(mode);
  m.patch_radius = get<std::int32_t>(in);
  m.window = get<std::int32_t>(in);
  m.temperature = get<double>(in);
  m.d_max = get<std::int32_t>(in);
  m.binocular = get<std::uint8_t>(in) != 0;
  s.doe = get_tensor(in);
  s.doe_moments.m = get_tensor(in);
  s.doe_moments.v = get_tensor(in);
  if (get<std::uint32_t>(in) != 4) throw FormatError("checkpoint: expected 4 matcher tensors");
  const std::array<Gridd*, 4> values{&m.cam.kernels, &m.cam.bias, &m.illum.kernels, &m.illum.bias};
  for (Gridd* v : values) {
    *v = get_tensor(in);
    AdamMoments mom;
    mom.m = get_tensor(in);
    mom.v = get_tensor(in);
    s.matcher_moments.push_back(std::move(mom));
  }
  const auto n = get<std::uint64_t>(in);
  if (n != s.iteration) throw FormatError("checkpoint: history length does not match the iteration count");
  s.history.resize(n);
  for (LossRecord& r : s.history) {
    r.loss = get<double>(in);
    r.alpha = get<double>(in);
    r.beta = get<double>(in);
    r.noise_sigma = get<double>(in);
  }
  try {
    m.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  return s;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history) {
  io::ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iteration,loss,alpha,beta,noise_sigma\n" << std::setprecision(17);
  for (std::size_t i = 0; i < history.size(); ++i) {
    const LossRecord& r = history[i];
    out << i << ',' << r.loss << ',' << r.alpha << ',' << r.beta << ',' << r.noise_sigma << '\n';
  }
}

std::vector<LossRecord> read_loss_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("iteration,loss", 0) != 0) throw FormatError(path.string() + ": missing loss CSV header");
  std::vector<LossRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::size_t it;
    LossRecord r;
    if (!(ss >> it >> r.loss >> r.alpha >> r.beta >> r.noise_sigma) || it != out.size()) {
      throw FormatError(path.string() + ": malformed row " + std::to_string(out.size()));
    }
    out.push_back(r);
  }
  return out;
}

// ---- target pattern design ---------------------------------------------------------------------------

DesignMethod parse_design_method(const std::string& name) {
  if (name == "gradient") return DesignMethod::Gradient;
  if (name == "iterative_fft" || name == "iterative-fft" || name == "gs") return DesignMethod::IterativeFFT;
  throw ConfigError("unknown design method '" + name + "' (gradient | iterative_fft)");
}

namespace {

CGridd doe_plane_field(const Gridd& normalized) {
  const double a = 1.0 / static_cast<double>(normalized.rows());
  CGridd u(normalized.rows(), normalized.cols());
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = std::polar(a, 2 * std::numbers::pi * normalized(i));
  return u;
}

struct DesignTracker {
  const Gridd& target;
  Gridd amp;
  DesignResult& result;

  void record(const Gridd& intensity) {
    result.amplitude_error.push_back((intensity.sqrt() - amp).square().sum());
    result.intensity_error.push_back((intensity - target).square().sum());
    result.correlation.push_back(normalized_cross_correlation<double>(intensity, target));
  }
};

}  // namespace

Gridd far_field_intensity(const Gridd& normalized) { return centered_dft2(doe_plane_field(normalized)).abs2(); }

DesignResult design_doe_for_target(const Gridd& target_in, const OpticsConfig& optics, const DesignOptions& options) {
  optics.validate();
  if (target_in.rows() != optics.n || target_in.cols() != optics.n) {
    throw ShapeError("design_doe_for_target: target must be " + std::to_string(optics.n) + "x" +
                     std::to_string(optics.n));
  }
  if (!all_finite(target_in) || (target_in < 0).any()) throw ConfigError("invalid target: negative or non-finite");
  const double total = target_in.sum();
  if (!(total > 0)) throw ConfigError("invalid target: all-zero pattern");
  if (options.iterations < 0) throw ConfigError("design_doe_for_target: iterations must be >= 0");
  const Gridd target = target_in / total;

  Gridd t;
  if (options.init) {
    require_same_shape(*options.init, target, "design_doe_for_target init");
    t = *options.init;
  } else {
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    t.resize(optics.n, optics.n);
    for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = uni(rng);
  }

  DesignResult result{doe_from_normalized(t, optics), {}, {}, {}, {}, {}};
  DesignTracker track{target, target.sqrt(), result};

  if (options.method == DesignMethod::IterativeFFT) {
    CGridd u = doe_plane_field(t);
    const double a = 1.0 / static_cast<double>(optics.n);
    for (int it = 0; it < options.iterations; ++it) {
      CGridd f = centered_dft2(u);
      track.record(f.abs2());
      for (Eigen::Index i = 0; i < f.size(); ++i) {
        const double mag = std::abs(f(i));
        f(i) = mag > 0 ? f(i) * (track.amp(i) / mag) : std::complex<double>(track.amp(i), 0);
      }
      u = centered_idft2(f);
      for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = std::polar(a, std::arg(u(i)));
    }
    if (options.iterations > 0) {
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        const double phase = std::arg(u(i)) / (2 * std::numbers::pi);
        t(i) = phase - std::floor(phase);
      }
    }
  } else {
    OptimHyper h;
    AdamMoments mom = zero_moments(t);
    const CGridd laser = CGridd::Constant(optics.n, optics.n, 1.0 / static_cast<double>(optics.n));
    for (int it = 0; it < options.iterations; ++it) {
      diff::Tape tape;
      const diff::Var leaf = tape.leaf(t);
      const diff::ComplexVar u =
          diff::apply_phase_delay(diff::complex_constant(tape, laser), leaf, 2 * std::numbers::pi);
      const diff::Var intensity = diff::squared_magnitude(diff::dft2(u));
      track.record(intensity.value());
      const diff::Var loss = diff::squared_error(intensity, target);
      const Gridd g = tape.backward(loss, std::span<const diff::Var>(&leaf, 1)).front();
      adam_step(t, mom, g, options.learning_rate, h, static_cast<std::uint64_t>(it) + 1);
    }
    t -= t.floor();
  }
  t = t.unaryExpr([](double x) { return x >= 1.0 ? 0.0 : x; });

  result.doe = doe_from_normalized(t, optics);
  if (options.quantize) result.doe = quantize_heights(result.doe);
  result.normalized = normalized_from_doe(result.doe);
  result.far_field = far_field_intensity(result.normalized);
  track.record(result.far_field);
  return result;
}

// ---- pattern analysis ------------------------------------------------------------------------------

PatternMetrics pattern_metrics(const Gridd& p) {
  PatternMetrics m;
  if (p.size() == 0) return m;
  const double peak = p.maxCoeff();
  const double mean = p.mean();
  const double total = p.sum();
  const Eigen::Index h = p.rows(), w = p.cols();
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      const double v = p(y, x);
      if (!(v > 0.1 * peak)) continue;
      bool is_max = true;
      for (Eigen::Index dy = -1; dy <= 1 && is_max; ++dy) {
        for (Eigen::Index dx = -1; dx <= 1; ++dx) {
          if ((dy == 0 && dx == 0) || y + dy < 0 || y + dy >= h || x + dx < 0 || x + dx >= w) continue;
          if (p(y + dy, x + dx) >= v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) ++m.dot_count;
    }
  }
  m.peak_to_mean = mean > 0 ? peak / mean : 0.0;

  std::vector<double> s(p.data(), p.data() + p.size());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  if (total > 0) {
    double weighted = 0;
    for (std::size_t i = 0; i < s.size(); ++i) weighted += static_cast<double>(i + 1) * s[i];
    m.gini = 2 * weighted / (n * total) - (n + 1) / n;
    const auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(0.01 * n)));
    double top = 0;
    for (std::size_t i = s.size() - k; i < s.size(); ++i) top += s[i];
    m.top1_energy = top / total;
  }
  return m;
}

}  // namespace astereo
