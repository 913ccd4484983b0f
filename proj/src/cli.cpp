#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

#include "astereo/gradcheck.hpp"
#include "astereo/harness.hpp"
#include "astereo/io.hpp"

namespace astereo {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<double> eta;

  RunConfig load() const {
    RunConfig c = config.empty() ? RunConfig{} : read_run_config(config);
    if (eta) c.optics.eta = *eta;
    return c;
  }
  fs::path outdir(const RunConfig& c) const {
    if (!out.empty()) return out;
    if (!c.output_dir.empty()) return c.output_dir;
    return default_output_dir();
  }
};

void add_common(CLI::App* app, Common& c, bool with_eta) {
  app->add_option("--config", c.config, "Run configuration file")->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "Output directory (default: $ASTEREO_OUT or ./out)");
  if (with_eta) app->add_option("--eta", c.eta, "DOE refractive index at the laser wavelength");
}

Gridd load_mask(const std::string& path, const Gridd& like) {
  const io::NetpbmImage img = io::read_netpbm(path);
  Gridd m = (img.channels.front() > 0).cast<double>();
  require_same_shape(m, like, "mask");
  return m;
}

// ---- simulate ----

struct SimulateArgs {
  Common common;
  std::string scene;
  std::optional<double> plane;
  int size = 128;
  std::string doe;
  std::uint64_t doe_seed = 1;
  std::optional<double> alpha, beta, noise, gamma;
  std::uint64_t seed = 1;
};

int run_simulate(const SimulateArgs& a) {
  RunConfig cfg = a.common.load();
  const fs::path out = a.common.outdir(cfg);
  SceneSample scene;
  std::vector<std::string> warnings;
  if (!a.scene.empty()) {
    scene = generate_toy_scene(read_scene_descriptor(a.scene), cfg.rig, &warnings);
    scene.name = fs::path(a.scene).stem().string();
  } else {
    scene = plane_scene(a.size, a.plane.value_or(1.0), cfg.rig);
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  if (scene.rows() != scene.cols()) throw ConfigError("simulate: the scene must be square to match the DOE grid");

  const OpticsConfig optics = cfg.optics_for(scene.rows());
  optics.validate();
  DOEProfile<double> doe = a.doe.empty() ? random_doe<double>(optics.n, optics.eta, optics.levels, optics.pitch,
                                                                optics.wavelength, a.doe_seed)
                                         : io::read_doe(a.doe);
  if (doe.size() != scene.rows()) throw ShapeError("simulate: DOE grid does not match the scene size");
  const auto pattern = simulate_pattern(doe, cfg.rig, optics.pattern_options());

  CaptureConfig env;
  if (!a.common.config.empty()) {
    std::mt19937_64 rng(a.seed);
    env = cfg.environment.sample(rng);
  }
  if (a.alpha) env.alpha = *a.alpha;
  if (a.beta) env.beta = *a.beta;
  if (a.noise) env.noise_sigma = *a.noise;
  if (a.gamma) env.gamma = *a.gamma;
  env.rng_seed = a.seed;
  const StereoCapture cap = synthesize_stereo(pattern, scene, cfg.rig, env);

  fs::create_directories(out);
  io::write_pfm(out / "left.pfm", cap.left);
  io::write_pfm(out / "right.pfm", cap.right);
  io::write_pfm(out / "illum.pfm", cap.illum);
  io::write_pfm(out / "disp_L.pfm", scene.disp_L);
  io::write_pfm(out / "disp_R.pfm", scene.disp_R);
  io::write_mask_pgm(out / "occ_L.pgm", scene.occ_L);
  io::write_mask_pgm(out / "occ_R.pgm", scene.occ_R);
  io::write_mask_pgm(out / "valid_L.pgm", supervision_mask(scene));
  io::write_pgm8(out / "left.pgm", cap.left, 0, 1);
  io::write_pgm8(out / "right.pgm", cap.right, 0, 1);
  io::write_pgm8_auto(out / "pattern.pgm", cap.illum);
  io::write_doe(out / "doe.bin", doe);
  std::cout << "simulated " << scene.rows() << "x" << scene.cols() << " scene '" << scene.name << "' (alpha "
            << env.alpha << ", beta " << env.beta << ", noise " << env.noise_sigma << ") -> " << out.string() << '\n';
  return kExitOk;
}

// ---- reconstruct ----

struct ReconstructArgs {
  Common common;
  std::string left, right, illum, checkpoint, output;
  std::string mode;
  std::optional<int> d_max;
  bool binocular = false;
};

int run_reconstruct(const ReconstructArgs& a) {
  RunConfig cfg = a.common.load();
  const Gridd left = io::read_pfm(a.left);
  const Gridd right = io::read_pfm(a.right);
  MatcherParams params = cfg.matcher_for(left.cols());
  if (!a.checkpoint.empty()) {
    const OptimState st = load_checkpoint(a.checkpoint);
    params = st.matcher;
  }
  if (!a.mode.empty()) params.mode = parse_feature_mode(a.mode);
  if (params.mode == FeatureMode::LearnedLinear && params.cam.kernels.size() == 0) {
    params = [&] {
      RunConfig c = cfg;
      c.matcher.mode = FeatureMode::LearnedLinear;
      return c.matcher_for(left.cols());
    }();
  }
  if (a.d_max) params.d_max = *a.d_max;
  if (a.binocular) params.binocular = true;
  Gridd illum;
  if (!params.binocular) {
    if (a.illum.empty()) throw ConfigError("reconstruct: --illum is required unless --binocular is given");
    illum = io::read_pfm(a.illum);
  } else {
    illum = Gridd::Zero(left.rows(), left.cols());
  }
  const Gridd disp = reconstruct(left, right, illum, params, cfg.rig);
  const fs::path out = a.output.empty() ? a.common.outdir(cfg) / "disp.pfm" : fs::path(a.output);
  io::write_pfm(out, disp);
  fs::path preview = out;
  io::write_colormap_ppm(preview.replace_extension(".ppm"), disp, 0, params.d_max);
  std::cout << "disparity (" << to_string(params.mode) << (params.binocular ? ", binocular" : ", trinocular")
            << ", D_max " << params.d_max << ") -> " << out.string() << '\n';
  return kExitOk;
}

// ---- eval ----

struct EvalArgs {
  Common common;
  std::vector<std::string> est, gt, mask;
  std::vector<double> thresholds{1.0, 2.0, 4.0};
  std::string pattern, csv;
};

int run_eval(const EvalArgs& a) {
  RunConfig cfg = a.common.load();
  if (a.est.size() != a.gt.size()) throw ConfigError("eval: give one --gt per --est");
  if (!a.mask.empty() && a.mask.size() != a.est.size()) throw ConfigError("eval: give one --mask per --est, or none");
  std::vector<SceneEval> scenes;
  for (std::size_t i = 0; i < a.est.size(); ++i) {
    const Gridd est = io::read_pfm(a.est[i]);
    const Gridd gt = io::read_pfm(a.gt[i]);
    const Gridd mask = a.mask.empty() ? Gridd((gt > 0).cast<double>()) : load_mask(a.mask[i], gt);
    scenes.push_back(compute_eval(est, gt, mask, cfg.rig, a.thresholds, fs::path(a.est[i]).stem().string()));
  }
  EvalReport report = aggregate_eval(std::move(scenes));
  if (!a.pattern.empty()) report.pattern = pattern_metrics(io::read_pfm(a.pattern));
  write_eval_text(std::cout, report);
  const fs::path csv = a.csv.empty() ? a.common.outdir(cfg) / "eval.csv" : fs::path(a.csv);
  write_eval_csv(csv, report);
  if (report.aggregate.degenerate) std::cerr << "warning: no valid pixels; report is degenerate\n";
  return kExitOk;
}

// ---- optimize ----

struct OptimizeArgs {
  Common common;
  std::string reference, checkpoint, resume;
  std::optional<int> iterations;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

int run_optimize(const OptimizeArgs& a) {
  RunConfig cfg = a.reference.empty() ? a.common.load() : reference_config(a.reference);
  if (a.common.eta) cfg.optics.eta = *a.common.eta;
  if (a.iterations) cfg.optimizer.iterations = *a.iterations;
  if (a.seed) cfg.seed = *a.seed;
  if (a.workers) cfg.optimizer.workers = *a.workers;
  const fs::path out = a.common.outdir(cfg);
  cfg.optimizer.dump_dir = out / "failure";
  cfg.validate();

  const Eigen::Index n = cfg.optics.n;
  const OpticsConfig optics = cfg.optics_for(n);
  optics.validate();
  const auto dataset = toy_training_set(cfg.scene_count, n, 200, cfg.rig);
  OptimState state = a.resume.empty() ? initial_state(optics, cfg.matcher_for(n), cfg.seed) : load_checkpoint(a.resume);
  state = joint_optimize(dataset, cfg.rig, optics, cfg.environment, cfg.optimizer, std::move(state));

  fs::create_directories(out);
  const fs::path ckpt = a.checkpoint.empty() ? out / "optim.ckpt" : fs::path(a.checkpoint);
  save_checkpoint(ckpt, state);
  write_loss_csv(out / "loss.csv", state.history);
  io::write_doe(out / "doe.bin", doe_from_normalized(state.doe, optics));
  const Gridd pattern = checkpoint_pattern(state, cfg);
  io::write_pfm(out / "pattern.pfm", pattern);
  io::write_pgm8_auto(out / "pattern.pgm", pattern);
  const std::size_t w = std::min<std::size_t>(20, state.history.size());
  if (w > 0) {
    std::cout << "iterations " << state.iteration << "  smoothed loss " << smoothed_loss(state.history, 0, w) << " -> "
              << smoothed_loss(state.history, state.history.size() - w, w) << " px\n";
  }
  std::cout << "checkpoint " << ckpt.string() << '\n';
  return kExitOk;
}

// ---- design-doe ----

struct DesignArgs {
  Common common;
  std::string target, method = "iterative_fft";
  std::optional<std::uint64_t> target_seed;
  int size = 64;
  int iterations = 200;
  std::uint64_t seed = 1;
  double lr = 0.05;
  bool quantize = false;
};

int run_design(const DesignArgs& a) {
  RunConfig cfg = a.common.load();
  Gridd target;
  if (!a.target.empty()) {
    target = io::read_pfm(a.target);
  } else if (a.target_seed) {
    std::mt19937_64 rng(*a.target_seed);
    std::uniform_real_distribution<double> u(0, 1);
    Gridd src(a.size, a.size);
    for (Eigen::Index i = 0; i < src.size(); ++i) src(i) = u(rng);
    target = far_field_intensity(src);
  } else {
    throw ConfigError("design-doe: give --target FILE or --target-seed S");
  }
  if (target.rows() != target.cols()) throw ShapeError("design-doe: target must be square");
  const OpticsConfig optics = cfg.optics_for(target.rows());
  DesignOptions opts;
  opts.method = parse_design_method(a.method);
  opts.iterations = a.iterations;
  opts.seed = a.seed;
  opts.learning_rate = a.lr;
  opts.quantize = a.quantize;
  const DesignResult r = design_doe_for_target(target, optics, opts);
  const fs::path out = a.common.outdir(cfg);
  fs::create_directories(out);
  io::write_doe(out / "doe.bin", r.doe);
  io::write_doe_levels_pgm16(out / "doe_levels.pgm", r.doe);
  io::write_pfm(out / "far_field.pfm", r.far_field);
  io::write_pgm8_auto(out / "far_field.pgm", r.far_field);
  std::ofstream csv(out / "history.csv");
  csv << std::setprecision(17) << "iteration,amplitude_error,intensity_error,correlation\n";
  for (std::size_t i = 0; i < r.correlation.size(); ++i) {
    csv << i << ',' << r.amplitude_error[i] << ',' << r.intensity_error[i] << ',' << r.correlation[i] << '\n';
  }
  std::cout << "design (" << a.method << ", " << a.iterations << " iterations): correlation " << r.correlation.back()
            << " -> " << out.string() << '\n';
  return kExitOk;
}

// ---- gradcheck / metrics / reproduce ----

int run_gradcheck(std::uint64_t seed, int size) {
  constexpr double kTolerance = 1e-4;
  const auto results = diff::check_all_primitives(seed, size);
  bool ok = true;
  std::cout << std::left << std::setw(26) << "primitive" << std::right << std::setw(14) << "max_rel" << std::setw(10)
            << "compared" << std::setw(8) << "kinks" << '\n';
  for (const auto& r : results) {
    const bool pass = r.report.compared > 0 && r.report.max_rel < kTolerance;
    ok = ok && pass;
    std::cout << std::left << std::setw(26) << r.name << std::right << std::setw(14) << std::scientific
              << std::setprecision(3) << r.report.max_rel << std::defaultfloat << std::setw(10) << r.report.compared
              << std::setw(8) << r.report.kinks << (pass ? "" : "  FAIL") << '\n';
  }
  std::cout << (ok ? "all primitives within 1e-4\n" : "gradient check failed\n");
  return ok ? kExitOk : kExitNumeric;
}

int run_metrics(const std::string& path) {
  const Gridd p = io::read_pfm(path);
  if ((p < 0).any()) throw FormatError("metrics: pattern has negative samples");
  const PatternMetrics m = pattern_metrics(p);
  std::cout << "dot_count " << m.dot_count << "\npeak_to_mean " << m.peak_to_mean << "\ngini " << m.gini
            << "\ntop1_energy " << m.top1_energy << '\n';
  return kExitOk;
}

}  // namespace

int cli(int argc, const char* const* argv) {
  CLI::App app{"Active stereo illumination simulation, reconstruction and optimization"};
  app.name("astereo");
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Render stereo captures and the illumination image of a scene");
  add_common(s, sim.common, true);
  s->add_option("--scene", sim.scene, "Scene descriptor file")->check(CLI::ExistingFile);
  s->add_option("--plane", sim.plane, "Fronto-parallel plane depth [m] (default scene, 1 m)");
  s->add_option("--size", sim.size, "Plane scene size [px]")->check(CLI::Range(8, 4096));
  s->add_option("--doe", sim.doe, "DOE height file (default: random DOE)")->check(CLI::ExistingFile);
  s->add_option("--doe-seed", sim.doe_seed, "Seed of the random DOE");
  s->add_option("--alpha", sim.alpha, "Ambient term");
  s->add_option("--beta", sim.beta, "Projector power");
  s->add_option("--noise", sim.noise, "Sensor noise standard deviation");
  s->add_option("--gamma", sim.gamma, "Exposure");
  s->add_option("--seed", sim.seed, "Noise seed");

  ReconstructArgs rec;
  auto* r = app.add_subcommand("reconstruct", "Estimate left-view disparity from captures");
  add_common(r, rec.common, false);
  r->add_option("--left", rec.left, "Left capture (PFM)")->required()->check(CLI::ExistingFile);
  r->add_option("--right", rec.right, "Right capture (PFM)")->required()->check(CLI::ExistingFile);
  r->add_option("--illum", rec.illum, "Illumination image (PFM)")->check(CLI::ExistingFile);
  r->add_option("--checkpoint", rec.checkpoint, "Take matcher parameters from a checkpoint")->check(CLI::ExistingFile);
  r->add_option("--mode", rec.mode, "Feature mode: identity | patch | learned-linear");
  r->add_option("--d-max", rec.d_max, "Number of wide-baseline disparity candidates");
  r->add_flag("--binocular", rec.binocular, "Ignore the illumination image");
  r->add_option("-o,--output", rec.output, "Output disparity PFM (default: <out>/disp.pfm)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Compare disparity estimates with ground truth");
  add_common(e, ev.common, false);
  e->add_option("--est", ev.est, "Estimated disparity PFM (repeatable)")->required()->check(CLI::ExistingFile);
  e->add_option("--gt", ev.gt, "Ground-truth disparity PFM (repeatable)")->required()->check(CLI::ExistingFile);
  e->add_option("--mask", ev.mask, "Valid-pixel mask PGM (repeatable)")->check(CLI::ExistingFile);
  e->add_option("--thresholds", ev.thresholds, "Bad-pixel thresholds [px]")->delimiter(',');
  e->add_option("--pattern", ev.pattern, "Pattern PFM to report metrics for")->check(CLI::ExistingFile);
  e->add_option("--csv", ev.csv, "CSV output (default: <out>/eval.csv)");

  OptimizeArgs opt;
  auto* o = app.add_subcommand("optimize", "Jointly optimize the DOE and matcher on toy scenes");
  add_common(o, opt.common, true);
  o->add_option("--reference", opt.reference, "Use a reference run configuration")
      ->check(CLI::IsMember({"indoor", "outdoor", "generic", "noise-low", "noise-high"}));
  o->add_option("--checkpoint", opt.checkpoint, "Checkpoint to write (default: <out>/optim.ckpt)");
  o->add_option("--resume", opt.resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  o->add_option("--iterations", opt.iterations, "Total iteration count");
  o->add_option("--seed", opt.seed, "Run seed");
  o->add_option("--workers", opt.workers, "Parallel batch workers");

  DesignArgs des;
  auto* d = app.add_subcommand("design-doe", "Design a DOE for a target far-field pattern");
  add_common(d, des.common, true);
  d->add_option("--target", des.target, "Target intensity (PFM)")->check(CLI::ExistingFile);
  d->add_option("--target-seed", des.target_seed, "Generate the target from a random DOE with this seed");
  d->add_option("--size", des.size, "Grid size for --target-seed")->check(CLI::Range(2, 4096));
  d->add_option("--method", des.method, "iterative_fft | gradient");
  d->add_option("--iterations", des.iterations, "Iterations")->check(CLI::NonNegativeNumber);
  d->add_option("--seed", des.seed, "Initialization seed");
  d->add_option("--lr", des.lr, "Learning rate of the gradient method");
  d->add_flag("--quantize", des.quantize, "Snap heights to the configured levels");

  std::uint64_t gc_seed = 7;
  int gc_size = 16;
  auto* g = app.add_subcommand("gradcheck", "Check every differentiable primitive against finite differences");
  g->add_option("--seed", gc_seed, "Instance seed");
  g->add_option("--size", gc_size, "Instance size")->check(CLI::Range(8, 64));

  std::string metrics_path;
  auto* m = app.add_subcommand("metrics", "Dot count, peak-to-mean, Gini and top-1% energy of a pattern");
  m->add_option("pattern", metrics_path, "Pattern PFM")->required()->check(CLI::ExistingFile);

  std::string which, ckdir, rep_out;
  auto* rp = app.add_subcommand("reproduce", "Emit figure analogues (fig4..fig8 or all)");
  rp->add_option("figure", which, "fig4 | fig5 | fig6 | fig7 | fig8 | all")->required();
  rp->add_option("--checkpoints", ckdir, "Directory with <name>.ckpt reference checkpoints");
  rp->add_option("--out", rep_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    std::cerr << "error: " << ex.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*s) return run_simulate(sim);
    if (*r) return run_reconstruct(rec);
    if (*e) return run_eval(ev);
    if (*o) return run_optimize(opt);
    if (*d) return run_design(des);
    if (*g) return run_gradcheck(gc_seed, gc_size);
    if (*m) return run_metrics(metrics_path);
    if (*rp) {
      const fs::path out = rep_out.empty() ? default_output_dir() / "figures" : fs::path(rep_out);
      const fs::path ck = ckdir.empty() ? default_output_dir() / "checkpoints" : fs::path(ckdir);
      for (const auto& f : reproduce_figures(which, out, ck)) std::cout << f.string() << '\n';
      return kExitOk;
    }
  } catch (const NumericError& ex) {
    std::cerr << "numeric failure: " << ex.what() << '\n';
    return kExitNumeric;
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitData;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace astereo
