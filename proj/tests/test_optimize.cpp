#include <doctest.h>

#include <cmath>
#include <fstream>

#include "astereo/harness.hpp"
#include "astereo/optimize.hpp"
#include "test_util.hpp"

using namespace astereo;
using testutil::random_grid;
using testutil::TempDir;

namespace {

struct Setup {
  CameraRig rig = training_rig();
  OpticsConfig optics;
  std::vector<SceneSample> dataset;
  MatcherParams matcher;
  EnvironmentPreset env = EnvironmentPreset::indoor();
  OptimHyper hyper;

  Setup() {
    optics.eta = 1.5;
    dataset = toy_training_set(3, 32, 200, rig);
    matcher = MatcherParams::learned_linear(4, 3, 0.1, 1);
    matcher.d_max = 16;
    hyper.iterations = 4;
  }
  OptimState init(std::uint64_t seed = 1) const { return initial_state(optics, matcher, seed); }
  OptimState run(OptimState s) const { return joint_optimize(dataset, rig, optics, env, hyper, std::move(s)); }
};

void check_identical(const OptimState& a, const OptimState& b) {
  CHECK(a.iteration == b.iteration);
  CHECK((a.doe - b.doe).abs().maxCoeff() == 0.0);
  CHECK((a.doe_moments.v - b.doe_moments.v).abs().maxCoeff() == 0.0);
  CHECK((a.matcher.cam.kernels - b.matcher.cam.kernels).abs().maxCoeff() == 0.0);
  CHECK((a.matcher.illum.bias - b.matcher.illum.bias).abs().maxCoeff() == 0.0);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].loss == b.history[i].loss);
    CHECK(a.history[i].noise_sigma == b.history[i].noise_sigma);
  }
}

// Gini as mean absolute difference over all pairs.
double gini_pairs(const Gridd& p) {
  double acc = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    for (Eigen::Index j = 0; j < p.size(); ++j) acc += std::abs(p(i) - p(j));
  const double n = static_cast<double>(p.size());
  return acc / (2 * n * n * p.mean());
}

}  // namespace

TEST_CASE("zero learning rates leave every parameter untouched") {
  Setup s;
  s.hyper.lr_doe = 0;
  s.hyper.lr_matcher = 0;
  const OptimState a = s.init();
  const OptimState b = s.run(a);
  CHECK(b.iteration == 4);
  CHECK(b.history.size() == 4);
  CHECK((a.doe - b.doe).abs().maxCoeff() == 0.0);
  CHECK((a.matcher.cam.kernels - b.matcher.cam.kernels).abs().maxCoeff() == 0.0);
  CHECK((a.matcher.illum.kernels - b.matcher.illum.kernels).abs().maxCoeff() == 0.0);
}

TEST_CASE("zero iterations return the initial state") {
  Setup s;
  s.hyper.iterations = 0;
  const OptimState a = s.init();
  check_identical(a, s.run(a));
}

TEST_CASE("runs are deterministic, also with parallel batch members") {
  Setup s;
  s.hyper.batch = 2;
  const OptimState a = s.run(s.init());
  const OptimState b = s.run(s.init());
  check_identical(a, b);
  s.hyper.workers = 2;
  check_identical(a, s.run(s.init()));
  CHECK((a.doe.array() >= 0).all());
  CHECK((a.doe.array() < 1).all());
}

TEST_CASE("resuming from a checkpoint continues bit-identically") {
  Setup s;
  s.hyper.iterations = 6;
  const OptimState straight = s.run(s.init());

  TempDir dir("ckpt");
  s.hyper.iterations = 3;
  save_checkpoint(dir / "half.ckpt", s.run(s.init()));
  OptimState loaded = load_checkpoint(dir / "half.ckpt");
  CHECK(loaded.iteration == 3);
  s.hyper.iterations = 6;
  check_identical(straight, s.run(std::move(loaded)));

  save_checkpoint(dir / "full.ckpt", straight);
  check_identical(straight, load_checkpoint(dir / "full.ckpt"));
  write_loss_csv(dir / "loss.csv", straight.history);
  const auto back = read_loss_csv(dir / "loss.csv");
  REQUIRE(back.size() == straight.history.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i].loss == straight.history[i].loss);
}

TEST_CASE("malformed checkpoints are rejected") {
  TempDir dir("badckpt");
  {
    std::ofstream out(dir / "x.ckpt", std::ios::binary);
    out << "NOTACKPT and more";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "x.ckpt"), FormatError);
  Setup s;
  save_checkpoint(dir / "ok.ckpt", s.init());
  std::filesystem::resize_file(dir / "ok.ckpt", 40);
  CHECK_THROWS_AS(load_checkpoint(dir / "ok.ckpt"), FormatError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
  {
    std::ofstream out(dir / "loss.csv");
    out << "iteration,loss,alpha,beta,noise_sigma\n0,abc,0,1,0\n";
  }
  CHECK_THROWS_AS(read_loss_csv(dir / "loss.csv"), FormatError);
}

TEST_CASE("a single scene can be overfit") {
  Setup s;
  s.dataset.resize(1);
  s.env.noise_sigma = {0.0};
  s.env.alpha = {0.0, 0.0};
  s.hyper.iterations = 150;
  const OptimState out = s.run(s.init());
  const double start = smoothed_loss(out.history, 0, 10);
  const double end = smoothed_loss(out.history, 140, 10);
  MESSAGE("overfit loss " << start << " -> " << end);
  CHECK(end < 0.5);
  CHECK(end < 0.25 * start);
}

TEST_CASE("non-finite parameters stop the run with diagnostics") {
  Setup s;
  TempDir dir("dump");
  s.hyper.dump_dir = dir / "failure";
  OptimState st = s.init();
  st.matcher.cam.kernels(0, 0) = std::nan("");
  CHECK_THROWS_AS(s.run(st), NumericError);
  CHECK(std::filesystem::exists(dir / "failure" / "doe_snapshot.pfm"));
  CHECK(std::filesystem::exists(dir / "failure" / "failure.txt"));
  CHECK(std::filesystem::exists(dir / "failure" / "batch0_disp_L.pfm"));
}

TEST_CASE("optimizer input validation") {
  Setup s;
  OptimHyper bad = s.hyper;
  bad.batch = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s.hyper;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(joint_optimize({}, s.rig, s.optics, s.env, s.hyper, s.init()), ConfigError);
  OptimState wrong = s.init();
  wrong.doe = Gridd::Zero(16, 16);
  CHECK_THROWS_AS(s.run(wrong), ShapeError);
  CHECK_THROWS_AS(EnvironmentPreset::from_name("underwater"), ConfigError);
  CHECK_THROWS_AS(smoothed_loss({}, 0, 1), RangeError);
}

TEST_CASE("environment presets sample inside their ranges") {
  std::mt19937_64 rng(3);
  for (const auto& name : {"indoor", "outdoor", "generic"}) {
    const EnvironmentPreset p = EnvironmentPreset::from_name(name);
    p.validate();
    for (int i = 0; i < 50; ++i) {
      const CaptureConfig c = p.sample(rng);
      CHECK(c.alpha >= p.alpha.lo);
      CHECK(c.alpha <= p.alpha.hi);
      CHECK(c.beta >= p.beta.lo);
      CHECK(c.beta <= p.beta.hi);
      CHECK(std::find(p.noise_sigma.begin(), p.noise_sigma.end(), c.noise_sigma) != p.noise_sigma.end());
    }
  }
  CHECK(EnvironmentPreset::outdoor().alpha.hi > EnvironmentPreset::indoor().alpha.hi);
}

TEST_CASE("pattern metrics on simple patterns") {
  Gridd dot = Gridd::Zero(10, 10);
  dot(4, 6) = 5.0;
  const PatternMetrics d = pattern_metrics(dot);
  CHECK(d.dot_count == 1);
  CHECK(d.peak_to_mean == doctest::Approx(100.0));
  CHECK(d.gini == doctest::Approx(0.99));
  CHECK(d.top1_energy == doctest::Approx(1.0));

  const PatternMetrics u = pattern_metrics(Gridd::Constant(10, 10, 2.0));
  CHECK(u.dot_count == 0);
  CHECK(u.peak_to_mean == doctest::Approx(1.0));
  CHECK(std::abs(u.gini) < 1e-12);
  CHECK(u.top1_energy == doctest::Approx(0.01));

  Gridd two = Gridd::Constant(10, 10, 0.01);
  two(2, 2) = 1.0;
  two(7, 7) = 0.5;
  two(7, 8) = 0.5;  // plateau: neither sample is a strict maximum
  CHECK(pattern_metrics(two).dot_count == 1);

  const Gridd r = random_grid(12, 12, 5);
  CHECK(pattern_metrics(r).gini == doctest::Approx(gini_pairs(r)).epsilon(1e-12));
}

TEST_CASE("iterative design keeps unit energy and improves the fit") {
  OpticsConfig optics;
  optics.n = 32;
  optics.eta = 1.5;
  const Gridd target = far_field_intensity(random_grid(32, 32, 9));
  DesignOptions opts;
  opts.iterations = 50;
  const DesignResult r = design_doe_for_target(target, optics, opts);
  CHECK(r.far_field.sum() == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(r.amplitude_error.size() == 51);
  for (std::size_t i = 1; i < r.amplitude_error.size(); ++i) CHECK(r.amplitude_error[i] <= r.amplitude_error[i - 1] + 1e-12);
  CHECK(r.correlation.back() > r.correlation.front());
  CHECK(r.correlation.back() > 0.9);
}

TEST_CASE("design with zero iterations returns the initialization") {
  OpticsConfig optics;
  optics.n = 16;
  optics.eta = 1.5;
  DesignOptions opts;
  opts.iterations = 0;
  opts.init = random_grid(16, 16, 4);
  for (const auto m : {DesignMethod::IterativeFFT, DesignMethod::Gradient}) {
    opts.method = m;
    const DesignResult r = design_doe_for_target(Gridd::Ones(16, 16), optics, opts);
    CHECK((r.normalized - *opts.init).abs().maxCoeff() < 1e-6);
    CHECK(r.amplitude_error.size() == 1);
  }
}

TEST_CASE("design rejects unusable targets") {
  OpticsConfig optics;
  optics.n = 8;
  optics.eta = 1.5;
  CHECK_THROWS_AS(design_doe_for_target(Gridd::Zero(8, 8), optics, {}), ConfigError);
  Gridd neg = Gridd::Ones(8, 8);
  neg(1, 1) = -1;
  CHECK_THROWS_AS(design_doe_for_target(neg, optics, {}), ConfigError);
  CHECK_THROWS_AS(design_doe_for_target(Gridd::Ones(4, 4), optics, {}), ShapeError);
  CHECK_THROWS_AS(parse_design_method("annealing"), ConfigError);
}

TEST_CASE("quantized design lands on the DOE levels") {
  OpticsConfig optics;
  optics.n = 16;
  optics.eta = 1.5;
  DesignOptions opts;
  opts.iterations = 10;
  opts.quantize = true;
  const DesignResult r = design_doe_for_target(random_grid(16, 16, 2), optics, opts);
  const Gridd k = r.normalized * 16.0;
  CHECK((k - k.round()).abs().maxCoeff() < 1e-6);
}
