#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "astereo/harness.hpp"
#include "astereo/io.hpp"
#include "test_util.hpp"

using namespace astereo;
using testutil::random_grid;
using testutil::TempDir;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_run_config(in, "test.ini");
}

std::string config_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "astereo");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli(static_cast<int>(argv.size()), argv.data());
}

// Direct per-pixel definitions, with no shared code.
struct Naive {
  double mae = 0, depth = 0, bad1 = 0;
};
Naive naive_eval(const Gridd& est, const Gridd& gt, const Gridd& mask, const CameraRig& rig) {
  double n = 0, nd = 0, sum = 0, dsum = 0, bad = 0;
  for (Eigen::Index y = 0; y < gt.rows(); ++y) {
    for (Eigen::Index x = 0; x < gt.cols(); ++x) {
      if (mask(y, x) == 0) continue;
      const double e = std::abs(est(y, x) - gt(y, x));
      n += 1;
      sum += e;
      if (e > 1.0) bad += 1;
      if (est(y, x) > 0.5 && gt(y, x) > 0.5) {
        const double k = rig.focal * rig.baseline_wide / rig.pixel;
        dsum += std::abs(k / est(y, x) - k / gt(y, x));
        nd += 1;
      }
    }
  }
  return Naive{sum / n, nd > 0 ? dsum / nd : 0.0, bad / n};
}

}  // namespace

TEST_CASE("a complete configuration parses") {
  const RunConfig c = parse(R"(
# comment
[rig]
focal = 0.006
pixel = 5.3e-6
baseline_wide = 0.05
baseline_narrow = 0.02

[optics]
n = 64
eta = 1.46
levels = 8
zeroth_order = 0.1

[environment]
preset = outdoor
alpha = 0.1:0.4
noise_sigma = 0.01, 0.05

[matcher]
mode = learned-linear
window = 3
d_max = auto
channels = 2

[optimizer]
iterations = 7
batch = 2
train_matcher = false

[run]
seed = 42
scenes = 3
)");
  CHECK(c.rig.baseline_narrow == 0.02);
  CHECK(c.optics.n == 64);
  CHECK(c.optics.eta == 1.46);
  CHECK(c.optics.levels == 8);
  CHECK(c.environment.alpha.lo == 0.1);
  CHECK(c.environment.alpha.hi == 0.4);
  CHECK(c.environment.noise_sigma.size() == 2);
  CHECK(c.matcher.mode == FeatureMode::LearnedLinear);
  CHECK(c.d_max_auto);
  CHECK(c.optimizer.iterations == 7);
  CHECK_FALSE(c.optimizer.train_matcher);
  CHECK(c.seed == 42);
  CHECK(c.scene_count == 3);
  const MatcherParams m = c.matcher_for(64);
  CHECK(m.d_max == auto_d_max(c.rig, 64));
  CHECK(m.cam.channels() == 2);
  CHECK(c.optics_for(64).pitch == doctest::Approx(1e-3 / 64));
}

TEST_CASE("configuration errors name the offending line") {
  CHECK(config_error("[rig]\nfocal = 0.006\nfocall = 1\n").find("test.ini:3") != std::string::npos);
  CHECK(config_error("[rig]\nfocal = 0.006\nfocal = 0.007\n").find("duplicate") != std::string::npos);
  CHECK(config_error("[camera]\n").find("unknown section") != std::string::npos);
  CHECK(config_error("focal = 1\n").find("outside") != std::string::npos);
  CHECK_FALSE(config_error("[optics]\neta = abc\n").empty());
  CHECK_FALSE(config_error("[optics]\neta = 0.9\n").empty());
  CHECK_FALSE(config_error("[optimizer]\nbatch = 1.5\n").empty());
  CHECK_FALSE(config_error("[optimizer]\ntrain_doe = maybe\n").empty());
  CHECK_FALSE(config_error("[environment]\nalpha = 0.5:0.1\n").empty());
  CHECK_FALSE(config_error("[environment]\npreset = moon\n").empty());
  CHECK_FALSE(config_error("[matcher]\nmode = sift\n").empty());
  CHECK_FALSE(config_error("[rig]\nfocal\n").empty());
  CHECK_FALSE(config_error("[rig]\nfocal =\n").empty());
  CHECK_FALSE(config_error("[rig\n").empty());
  CHECK_THROWS_AS(read_run_config("/nonexistent.ini"), IoError);
  CHECK(parse_range("0.3").lo == 0.3);
  CHECK(parse_range("0.3").hi == 0.3);
}

TEST_CASE("refractive index has no default") {
  const RunConfig c = parse("[run]\nseed = 1\n");
  CHECK_THROWS_AS(c.optics_for(32).validate(), ConfigError);
}

TEST_CASE("evaluation of exact and offset estimates") {
  const CameraRig rig;
  const double d1m = rig.disparity(1.0);
  const Gridd gt = Gridd::Constant(8, 8, d1m);
  const Gridd mask = Gridd::Ones(8, 8);
  const SceneEval exact = compute_eval(gt, gt, mask, rig, {0.5, 1.0});
  CHECK(exact.mae == 0.0);
  CHECK(exact.depth_mae == 0.0);
  CHECK(exact.bad[0] == 0.0);

  const SceneEval off = compute_eval(Gridd(gt + 1.0), gt, mask, rig, {0.5, 1.0});
  CHECK(off.mae == doctest::Approx(1.0));
  CHECK(off.bad[0] == 1.0);
  CHECK(off.bad[1] == 0.0);  // strictly greater than the threshold
  CHECK(std::abs(off.depth_mae - 0.016) < 0.001);
  CHECK(off.valid_fraction() == 1.0);
}

TEST_CASE("evaluation matches a naive per-pixel computation") {
  const CameraRig rig;
  const Gridd gt = random_grid(20, 30, 1, 0, 40);
  const Gridd est = random_grid(20, 30, 2, 0, 40);
  const Gridd mask = (random_grid(20, 30, 3) > 0.3).cast<double>();
  const SceneEval e = compute_eval(est, gt, mask, rig, {1.0});
  const Naive n = naive_eval(est, gt, mask, rig);
  CHECK(e.mae == doctest::Approx(n.mae).epsilon(1e-12));
  CHECK(e.depth_mae == doctest::Approx(n.depth).epsilon(1e-12));
  CHECK(e.bad[0] == doctest::Approx(n.bad1).epsilon(1e-12));
  CHECK(e.valid == static_cast<long>(mask.sum()));
}

TEST_CASE("aggregation is independent of scene order") {
  const CameraRig rig;
  std::vector<SceneEval> scenes;
  for (int i = 0; i < 5; ++i) {
    const Gridd gt = random_grid(10, 10, 10 + i, 1, 20);
    const Gridd est = random_grid(10, 10, 20 + i, 1, 20);
    const Gridd mask = (random_grid(10, 10, 30 + i) > 0.2 * i).cast<double>();
    scenes.push_back(compute_eval(est, gt, mask, rig, {1.0, 2.0}, "s" + std::to_string(i)));
  }
  const EvalReport a = aggregate_eval(scenes);
  std::reverse(scenes.begin(), scenes.end());
  std::swap(scenes[1], scenes[3]);
  const EvalReport b = aggregate_eval(scenes);
  CHECK(a.aggregate.mae == b.aggregate.mae);
  CHECK(a.aggregate.depth_mae == b.aggregate.depth_mae);
  CHECK(a.aggregate.bad == b.aggregate.bad);
  double num = 0, den = 0;
  for (const auto& s : scenes) {
    num += s.mae * static_cast<double>(s.valid);
    den += static_cast<double>(s.valid);
  }
  CHECK(a.aggregate.mae == doctest::Approx(num / den).epsilon(1e-12));
}

TEST_CASE("an empty mask gives a degenerate report") {
  const SceneEval e = compute_eval(Gridd::Ones(4, 4), Gridd::Ones(4, 4), Gridd::Zero(4, 4), CameraRig{});
  CHECK(e.degenerate);
  CHECK(e.valid == 0);
  const EvalReport r = aggregate_eval({e});
  CHECK(r.aggregate.degenerate);
  std::ostringstream text;
  write_eval_text(text, r);
  CHECK(text.str().find("degenerate") != std::string::npos);
}

TEST_CASE("reference scenes") {
  const CameraRig rig = training_rig();
  const SceneSample a = toy_training_scene(32, 5, rig);
  const SceneSample b = toy_training_scene(32, 5, rig);
  CHECK((a.disp_L - b.disp_L).abs().maxCoeff() == 0.0);
  CHECK(a.disp_L.maxCoeff() < 16);
  const SceneSample occ = occlusion_scene(128, 100, CameraRig{});
  const Gridd band = occlusion_band(occ);
  CHECK(band.sum() > 0);
  CHECK((band * (1 - occ.occ_L)).abs().maxCoeff() == 0.0);
  CHECK(auto_d_max(CameraRig{}, 128) == 127);
  CHECK_THROWS_AS(reference_config("lab"), ConfigError);
  CHECK(reference_config("noise-high").environment.noise_sigma.front() == 0.6);
}

TEST_CASE("PFM and DOE files round-trip") {
  TempDir dir("io");
  const Gridd g = random_grid(7, 9, 4);
  io::write_pfm(dir / "g.pfm", g);
  CHECK((io::read_pfm(dir / "g.pfm") - g.cast<float>().cast<double>()).abs().maxCoeff() == 0.0);
  const auto doe = random_doe<double>(16, 1.5, 16, 1e-6, 850e-9, 3);
  io::write_doe(dir / "d.bin", doe);
  const auto back = io::read_doe(dir / "d.bin");
  CHECK(back.eta() == 1.5);
  CHECK(back.levels() == 16);
  CHECK((back.heights() - doe.heights().cast<float>().cast<double>()).abs().maxCoeff() == 0.0);
}

TEST_CASE("command line exit codes") {
  TempDir dir("cli");
  const std::string out = (dir / "sim").string();
  CHECK(run_cli({}) == kExitUsage);
  CHECK(run_cli({"simulate", "--no-such-flag"}) == kExitUsage);
  CHECK(run_cli({"simulate", "--size", "32", "--out", out}) == kExitData);  // no refractive index
  CHECK(run_cli({"reconstruct", "--left", "/nonexistent.pfm", "--right", "/nonexistent.pfm"}) == kExitUsage);
  {
    std::ofstream bad(dir / "bad.pfm");
    bad << "P5\n";
  }
  const std::string bad = (dir / "bad.pfm").string();
  CHECK(run_cli({"metrics", bad}) == kExitData);
  CHECK(run_cli({"reproduce", "fig4", "--checkpoints", (dir / "none").string(), "--out", out}) == kExitData);
  CHECK(run_cli({"design-doe", "--eta", "1.5", "--out", out}) == kExitData);
}

TEST_CASE("missing checkpoints explain how to produce them") {
  TempDir dir("fig");
  try {
    reproduce_figures("fig6", dir / "out", dir / "ck");
    FAIL("expected an error");
  } catch (const IoError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("astereo optimize --reference") != std::string::npos);
  }
}

TEST_CASE("simulate, reconstruct and eval through the command line") {
  TempDir dir("pipeline");
  const std::string out = dir.path().string();
  REQUIRE(run_cli({"simulate", "--size", "128", "--plane", "1.0", "--eta", "1.5", "--noise", "0.01", "--out", out}) ==
          kExitOk);
  const std::string disp = (dir / "disp.pfm").string();
  REQUIRE(run_cli({"reconstruct", "--left", (dir / "left.pfm").string(), "--right", (dir / "right.pfm").string(),
                   "--illum", (dir / "illum.pfm").string(), "-o", disp}) == kExitOk);
  const Gridd est = io::read_pfm(disp);
  const Gridd gt = io::read_pfm(dir / "disp_L.pfm");
  const Gridd mask = (io::read_netpbm(dir / "valid_L.pgm").channels.front() > 0).cast<double>();
  const SceneEval e = compute_eval(est, gt, mask, CameraRig{});
  MESSAGE("plane MAE " << e.mae);
  CHECK(e.mae < 0.5);
  CHECK(run_cli({"eval", "--est", disp, "--gt", (dir / "disp_L.pfm").string(), "--mask", (dir / "valid_L.pgm").string(),
                 "--csv", (dir / "eval.csv").string()}) == kExitOk);
  CHECK(std::filesystem::exists(dir / "eval.csv"));
  CHECK(run_cli({"metrics", (dir / "illum.pfm").string()}) == kExitOk);
}

TEST_CASE("gradient check through the command line") {
  CHECK(run_cli({"gradcheck", "--size", "16"}) == kExitOk);
}
