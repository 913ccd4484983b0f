#include <random>

#include "astereo/gradcheck.hpp"
#include "astereo/pipeline.hpp"

namespace astereo::diff {

namespace {

Gridd uniform(Eigen::Index rows, Eigen::Index cols, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Gridd g(rows, cols);
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = u(rng);
  return g;
}

/// <out, w> for a fixed random weight grid, turning any primitive into a scalar.
Var project(const Var& out, const Gridd& w) { return sum(mul(out, out.tape()->constant(w))); }

struct Case {
  std::string name;
  Composite f;
  Gridd x0;
};

SceneSample small_scene(Eigen::Index n, const CameraRig& rig) {
  SceneDescriptor d;
  d.rows = d.cols = n;
  d.background_z = 2.0;
  d.background_reflectance = 0.6;
  d.rects.push_back(SceneRect{5.5, 2.5, 11.5, 12.5, 0.7, 0.9, 0.4});
  return generate_toy_scene(d, rig);
}

}  // namespace

std::vector<NamedGradCheck> check_all_primitives(std::uint64_t seed, int n) {
  if (n < 8) throw ConfigError("check_all_primitives: instances must be at least 8x8");
  std::mt19937_64 rng(seed);
  const Eigen::Index N = n;
  std::vector<Case> cases;

  const Gridd w = uniform(N, N, -1, 1, rng);
  const Gridd b = uniform(N, N, -1, 1, rng);
  const Gridd x = uniform(N, N, -1, 1, rng);
  const Gridd pos = uniform(N, N, 0.1, 1, rng);

  cases.push_back({"add", [&](Tape& t, const Var& v) { return project(add(v, t.constant(b)), w); }, x});
  cases.push_back({"sub", [&](Tape& t, const Var& v) { return project(sub(t.constant(b), v), w); }, x});
  cases.push_back({"mul", [&](Tape&, const Var& v) { return project(mul(v, v), w); }, x});
  cases.push_back({"scale", [&](Tape&, const Var& v) { return project(scale(v, -2.5), w); }, x});
  cases.push_back({"add_scalar", [&](Tape&, const Var& v) { return project(add_scalar(v, 0.3), w); }, x});
  cases.push_back({"sum", [&](Tape&, const Var& v) { return sum(mul(v, v)); }, x});
  cases.push_back({"mean", [&](Tape&, const Var& v) { return mean(mul(v, v)); }, x});
  cases.push_back({"squared_error", [&](Tape&, const Var& v) { return squared_error(v, b); }, x});
  const Gridd half_mask = (uniform(N, N, 0, 1, rng) > 0.3).cast<double>();
  cases.push_back({"masked_mae", [&](Tape&, const Var& v) { return masked_mae(v, b, half_mask); }, x});

  // wave optics; the leaf drives one real component or the heights
  const CGridd field = [&] {
    CGridd f(N, N);
    const Gridd re = uniform(N, N, -1, 1, rng), im = uniform(N, N, -1, 1, rng);
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = {re(i), im(i)};
    return f;
  }();
  const Gridd w2 = uniform(N, N, -1, 1, rng);
  auto complex_project = [&](const ComplexVar& c) { return add(project(c.re, w), project(c.im, w2)); };
  auto field_with_re = [&](Tape& t, const Var& v) { return ComplexVar{v, t.constant(field.imag())}; };
  cases.push_back({"apply_phase_delay",
                   [&](Tape& t, const Var& v) {
                     return complex_project(apply_phase_delay(complex_constant(t, field), v, 2.0));
                   },
                   x});
  cases.push_back({"dft2", [&](Tape& t, const Var& v) { return complex_project(dft2(field_with_re(t, v))); },
                   Gridd(field.real())});
  cases.push_back({"idft2", [&](Tape& t, const Var& v) { return complex_project(idft2(field_with_re(t, v))); },
                   Gridd(field.real())});
  cases.push_back({"squared_magnitude",
                   [&](Tape& t, const Var& v) { return project(squared_magnitude(field_with_re(t, v)), w); },
                   Gridd(field.real())});
  cases.push_back({"bicubic_rescale", [&](Tape&, const Var& v) { return project(bicubic_rescale(v, 1.0392), w); }, x});
  cases.push_back({"clamp_nonnegative", [&](Tape&, const Var& v) { return project(clamp_nonnegative(v), w); },
                   x});
  cases.push_back({"add_zeroth_order", [&](Tape&, const Var& v) { return project(add_zeroth_order(v, 0.2), w); }, x});

  // scene synthesis
  const Gridd occ = (uniform(N, N, 0, 1, rng) > 0.2).cast<double>();
  const Gridd disp = uniform(N, N, 0.2, 4.8, rng);
  const Gridd img = uniform(N, N, 0, 1, rng);
  cases.push_back({"warp_rows.src",
                   [&](Tape& t, const Var& v) { return project(warp_rows(v, t.constant(disp), occ, 0.5), w); }, img});
  cases.push_back({"warp_rows.disp",
                   [&](Tape& t, const Var& v) { return project(warp_rows(t.constant(img), v, occ, -0.5), w); }, disp});
  CaptureConfig cap;
  cap.alpha = 0.1;
  cap.beta = 0.8;
  const Gridd noise = uniform(N, N, -0.05, 0.05, rng);
  cases.push_back({"radiometry_clamp",
                   [&](Tape& t, const Var& v) { return project(radiometry_clamp(v, t.constant(pos), cap, noise), w); },
                   uniform(N, N, 0, 1.6, rng)});

  // matcher
  const int C = 2, K = 3, D = 4;
  const Gridd kern = uniform(C * K, K, -1, 1, rng);
  const Gridd bias = uniform(C, 1, -0.5, 0.5, rng);
  const Gridd wc = uniform(C * N, N, -1, 1, rng);
  const Gridd patch_w = uniform(9 * N, N, -1, 1, rng);
  cases.push_back({"patch_features", [&](Tape&, const Var& v) { return project(patch_features(v, 1), patch_w); }, img});
  cases.push_back({"conv_features.image",
                   [&](Tape& t, const Var& v) { return project(conv_features(v, t.constant(kern), t.constant(bias)), wc); },
                   img});
  cases.push_back({"conv_features.kernels",
                   [&](Tape& t, const Var& v) { return project(conv_features(t.constant(img), v, t.constant(bias)), wc); },
                   kern});
  cases.push_back({"conv_features.bias",
                   [&](Tape& t, const Var& v) { return project(conv_features(t.constant(img), t.constant(kern), v), wc); },
                   bias});
  const Gridd feat_other = uniform(C * N, N, -1, 1, rng);
  const Gridd wv = uniform(D * N, N, -1, 1, rng);
  cases.push_back({"cost_volume",
                   [&](Tape& t, const Var& v) {
                     return project(cost_volume(reslice(v, C), t.constant(feat_other, C), D, 3), wv);
                   },
                   uniform(C * N, N, -1, 1, rng)});
  const Gridd narrow = uniform(3 * N, N, 0, 2, rng);
  cases.push_back({"fuse_volumes.wide",
                   [&](Tape& t, const Var& v) {
                     return project(fuse_volumes(reslice(v, D), t.constant(narrow, 3), 2.0), wv);
                   },
                   uniform(D * N, N, 0, 2, rng)});
  cases.push_back({"fuse_volumes.narrow",
                   [&](Tape& t, const Var& v) { return project(fuse_volumes(t.constant(wv.abs(), D), reslice(v, 3), 2.0), wv); },
                   narrow});
  cases.push_back({"soft_regress", [&](Tape&, const Var& v) { return project(soft_regress(reslice(v, D), 0.7), w); },
                   uniform(D * N, N, 0, 3, rng)});

  // end to end: DOE heights -> masked disparity MAE, and the same wrt the camera encoder
  const CameraRig rig = CameraRig::centered(6e-3, 5.3e-6, 5e-3);
  OpticsConfig optics;
  optics.n = N;
  optics.pitch = 1e-3 / static_cast<double>(N);
  optics.eta = 1.5;
  const SceneSample scene = small_scene(N, rig);
  const Gridd mask = supervision_mask(scene);
  CaptureConfig env;
  env.beta = 1.5;
  env.noise_sigma = 0.02;
  env.rng_seed = seed;
  const NoisePair pair = draw_noise(N, N, env);
  MatcherParams matcher = MatcherParams::learned_linear(2, 3, 0.1, seed);
  matcher.d_max = 8;
  const Gridd doe0 = uniform(N, N, 0, 1, rng);
  cases.push_back({"pipeline.doe",
                   [&](Tape&, const Var& v) {
                     return forward_pipeline(v, scene, env, pair, matcher, nullptr, rig, optics, mask).loss;
                   },
                   doe0});
  cases.push_back({"pipeline.cam_kernels",
                   [&](Tape& t, const Var& v) {
                     const MatcherLeaves leaves{v, t.constant(matcher.cam.bias), t.constant(matcher.illum.kernels),
                                                t.constant(matcher.illum.bias)};
                     return forward_pipeline(t.constant(doe0), scene, env, pair, matcher, &leaves, rig, optics, mask).loss;
                   },
                   matcher.cam.kernels});
  MatcherParams patch_matcher;
  patch_matcher.d_max = 8;
  cases.push_back({"pipeline.doe.patch",
                   [&](Tape&, const Var& v) {
                     return forward_pipeline(v, scene, env, pair, patch_matcher, nullptr, rig, optics, mask).loss;
                   },
                   doe0});

  std::vector<NamedGradCheck> out;
  GradCheckOptions opts;
  opts.num_probes = 24;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    opts.seed = seed + i;
    out.push_back(NamedGradCheck{cases[i].name, check_gradients(cases[i].f, cases[i].x0, opts)});
  }
  return out;
}

}  // namespace astereo::diff
