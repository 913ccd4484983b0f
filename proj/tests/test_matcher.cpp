#include <doctest.h>

#include <cmath>
#include <limits>

#include "astereo/matcher.hpp"
#include "astereo/matcher_kernels.hpp"
#include "test_util.hpp"

using namespace astereo;
using testutil::random_grid;

namespace {

Eigen::Index clampc(Eigen::Index x, Eigen::Index w) { return std::min(std::max(x, Eigen::Index{0}), w - 1); }

// Window cost of one candidate evaluated pixel by pixel with replicated borders.
double naive_cost(const Gridd& ref, const Gridd& other, Eigen::Index h, Eigen::Index y, Eigen::Index x, int d,
                  int window) {
  const Eigen::Index w = ref.cols();
  const Eigen::Index channels = ref.rows() / h;
  const int r = window / 2;
  double acc = 0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const Eigen::Index yy = clampc(y + dy, h), xx = clampc(x + dx, w);
      for (Eigen::Index c = 0; c < channels; ++c) {
        acc += std::abs(ref(c * h + yy, xx) - other(c * h + yy, clampc(xx - d, w)));
      }
    }
  }
  return acc;
}

Gridd integer_texture(Eigen::Index h, Eigen::Index w, std::uint64_t seed) {
  return random_grid(h, w, seed, 0, 16).floor();
}

}  // namespace

TEST_CASE("block matching equals an exhaustive argmin") {
  const Gridd l = integer_texture(12, 30, 1);
  const Gridd r = integer_texture(12, 30, 2);
  const int window = 3, d_max = 8;
  const Gridd disp = block_match_baseline(l, r, window, d_max);
  for (Eigen::Index y = 0; y < 12; ++y) {
    for (Eigen::Index x = 0; x < 30; ++x) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int d = 0; d < d_max; ++d) {
        const double c = naive_cost(l, r, 12, y, x, d, window);
        if (c < best) {
          best = c;
          arg = d;
        }
      }
      CHECK(disp(y, x) == arg);
    }
  }
}

TEST_CASE("block matching finds an integer shift") {
  const Gridd left = random_grid(10, 36, 3);
  Gridd right(10, 36);
  for (Eigen::Index x = 0; x < 36; ++x) right.col(x) = left.col(std::min<Eigen::Index>(x + 4, 35));
  const Gridd disp = block_match_baseline(left, right, 5, 10);
  CHECK((disp.block(0, 8, 10, 24) - 4.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("cost volume equals direct summation") {
  const Eigen::Index h = 6, w = 14;
  const Gridd ref = random_grid(2 * h, w, 4), other = random_grid(2 * h, w, 5);
  const int d_count = 5, window = 3;
  const Gridd vol = kernels::cost_volume<double>(ref, other, h, d_count, window);
  for (int d = 0; d < d_count; ++d)
    for (Eigen::Index y = 0; y < h; ++y)
      for (Eigen::Index x = 0; x < w; ++x)
        CHECK(vol(d * h + y, x) == doctest::Approx(naive_cost(ref, other, h, y, x, d, window)).epsilon(1e-12));
}

TEST_CASE("soft regression equals a direct softmax expectation") {
  const Eigen::Index h = 3, w = 4;
  const int d_count = 6;
  const Gridd vol = random_grid(d_count * h, w, 6, 0, 5);
  const double t = 0.7;
  const Gridd out = kernels::soft_regress<double>(vol, h, t);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      double z = 0, e = 0;
      for (int d = 0; d < d_count; ++d) {
        const double p = std::exp(-vol(d * h + y, x) / t);
        z += p;
        e += d * p;
      }
      CHECK(out(y, x) == doctest::Approx(e / z).epsilon(1e-12));
    }
  }
  // huge costs must not overflow
  const Gridd big = (vol * 1e4).eval();
  CHECK(all_finite(kernels::soft_regress<double>(big, h, 1e-3)));
}

TEST_CASE("fusion samples the narrow volume at the scaled disparity") {
  const Eigen::Index h = 2, w = 3;
  const Gridd wide = random_grid(5 * h, w, 7);
  const Gridd narrow = random_grid(3 * h, w, 8);
  CostVolume vw{wide, 5, BaselineKind::Wide, 0};
  CostVolume vn{narrow, 3, BaselineKind::Narrow, 0};
  const CostVolume fused = fuse_volumes(vw, vn, 2.0);
  CHECK(fused.kind == BaselineKind::Fused);
  for (int d = 0; d < 5; ++d) {
    const double dn = d / 2.0;
    const int i0 = static_cast<int>(dn);
    const double a = dn - i0;
    for (Eigen::Index y = 0; y < h; ++y)
      for (Eigen::Index x = 0; x < w; ++x) {
        double expect = wide(d * h + y, x) + (1 - a) * narrow(i0 * h + y, x);
        if (a > 0) expect += a * narrow((i0 + 1) * h + y, x);
        CHECK(fused.cost(d * h + y, x) == doctest::Approx(expect).epsilon(1e-14));
      }
  }
  CostVolume short_narrow{narrow.topRows(2 * h), 2, BaselineKind::Narrow, 0};
  CHECK_THROWS_AS(fuse_volumes(vw, short_narrow, 2.0), RangeError);
}

TEST_CASE("patch descriptors ignore gain and offset") {
  const Gridd img = random_grid(10, 10, 9);
  const Gridd a = kernels::patch_features<double>(img, 1);
  const Gridd b = kernels::patch_features<double>(Gridd(3.0 * img + 0.25), 1);
  CHECK(a.rows() == 90);
  // the norm floor makes this approximate for low-contrast patches only
  CHECK((a - b).abs().maxCoeff() < 1e-3);
}

TEST_CASE("learned-linear delta encoder reproduces the image") {
  MatcherParams p;
  p.mode = FeatureMode::LearnedLinear;
  p.cam = p.illum = LinearEncoder::delta(2, 3);
  const Gridd img = random_grid(5, 7, 10);
  const FeatureMap f = extract_features(img, p, FeatureSource::Left);
  CHECK(f.count == 2);
  CHECK((f.channels.topRows(5) - img).abs().maxCoeff() == 0.0);
  CHECK((f.channels.bottomRows(5) - img).abs().maxCoeff() == 0.0);
}

TEST_CASE("reconstruction recovers a constant shift") {
  const Gridd t = random_grid(16, 48, 11);
  Gridd right(16, 48);
  for (Eigen::Index x = 0; x < 48; ++x) right.col(x) = t.col(std::min<Eigen::Index>(x + 3, 47));
  MatcherParams p;
  p.mode = FeatureMode::Identity;
  p.binocular = true;
  p.temperature = 0.01;
  p.d_max = 8;
  const Gridd disp = reconstruct(t, right, Gridd(), p, CameraRig{});
  CHECK((disp.block(2, 10, 12, 30) - 3.0).abs().maxCoeff() < 1e-6);

  // trinocular path with the pattern itself as third view, illuminator centered
  Gridd illum(16, 48);
  for (Eigen::Index x = 0; x < 48; ++x) illum.col(x) = t.col(std::min<Eigen::Index>(x + 1, 47));
  CameraRig rig;
  rig.baseline_narrow = rig.baseline_wide / 3;
  p.binocular = false;
  const Gridd tri = reconstruct(t, right, illum, p, rig);
  CHECK((tri.block(2, 10, 12, 30) - 3.0).abs().maxCoeff() < 1e-6);
}

TEST_CASE("matcher errors") {
  const Gridd img = random_grid(8, 8, 12);
  MatcherParams p;
  p.d_max = 8;
  CHECK_THROWS_AS(reconstruct(img, img, img, p, CameraRig{}), RangeError);
  CHECK_THROWS_AS(block_match_baseline(img, img, 3, 8), RangeError);
  CHECK_THROWS_AS(block_match_baseline(img, img, 2, 4), ConfigError);
  CHECK_THROWS_AS(parse_feature_mode("sift"), ConfigError);
  CHECK(parse_feature_mode("learned-linear") == FeatureMode::LearnedLinear);
  p.d_max = 4;
  p.window = 4;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.window = 5;
  p.temperature = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.temperature = 1;
  CHECK_THROWS_AS(reconstruct(img, random_grid(8, 9, 1), img, p, CameraRig{}), ShapeError);
  Gridd bad = img;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(reconstruct(bad, img, img, p, CameraRig{}), NumericError);
}

TEST_CASE("consistency mask keeps matching pixels") {
  const Gridd dl = Gridd::Constant(2, 10, 2.0);
  Gridd dr = dl;
  dr(0, 5) = 6.0;
  const Gridd m = consistency_mask(dl, dr);
  CHECK(m(1, 4) == 1.0);
  CHECK(m(0, 7) == 0.0);
  CHECK(m(0, 1) == 0.0);
}
