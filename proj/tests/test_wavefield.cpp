#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "astereo/fft.hpp"
#include "astereo/interp.hpp"
#include "astereo/wavefield.hpp"
#include "test_util.hpp"

using namespace astereo;
using testutil::random_field;
using testutil::random_grid;

namespace {

// Direct O(N^4) evaluation of the centered unitary DFT.
CGridd direct_dft(const CGridd& x) {
  const Eigen::Index n = x.rows();
  const double c = static_cast<double>(n / 2);
  const double s = 1.0 / static_cast<double>(n);
  CGridd out(n, n);
  for (Eigen::Index ky = 0; ky < n; ++ky) {
    for (Eigen::Index kx = 0; kx < n; ++kx) {
      std::complex<double> acc = 0;
      for (Eigen::Index jy = 0; jy < n; ++jy) {
        for (Eigen::Index jx = 0; jx < n; ++jx) {
          const double arg = -2 * std::numbers::pi *
                             ((ky - c) * (jy - c) + (kx - c) * (jx - c)) / static_cast<double>(n);
          acc += x(jy, jx) * std::polar(1.0, arg);
        }
      }
      out(ky, kx) = acc * s;
    }
  }
  return out;
}

double max_abs(const CGridd& a) { return a.abs().maxCoeff(); }

}  // namespace

TEST_CASE("centered DFT matches direct summation") {
  for (Eigen::Index n : {16, 15, 8}) {
    const CGridd x = random_field(n, 3 + static_cast<std::uint64_t>(n));
    const CGridd fast = centered_dft2(x);
    const CGridd slow = direct_dft(x);
    CHECK(max_abs(fast - slow) < 1e-10 * max_abs(slow));
  }
}

TEST_CASE("DFT is unitary and inverted by the inverse transform") {
  for (Eigen::Index n : {2, 16, 64, 100, 256}) {
    const ComplexField<double> u(random_field(n, 11), 1e-6, 850e-9);
    const auto f = propagate_far_field(u);
    CHECK(std::abs(f.power() - u.power()) <= 1e-10 * u.power());
    const CGridd back = centered_idft2(f.values());
    CHECK(max_abs(back - u.values()) < 1e-12);
  }
}

TEST_CASE("flat DOE puts all energy into the center sample") {
  const auto laser = laser_field<double>(32, 1e-3 / 32, 850e-9);
  const auto p = field_intensity(propagate_far_field(laser)).intensity;
  CHECK(p(16, 16) == doctest::Approx(32.0 * 32.0).epsilon(1e-12));
  CHECK(p.sum() - p(16, 16) < 1e-18 * p.sum() + 1e-9);
}

TEST_CASE("phase delay is phase-only") {
  const CGridd u = random_field(32, 5);
  const Gridd h = random_grid(32, 32, 6, 0, 5e-6);
  const CGridd v = apply_phase_delay<double>(u, h, 2 * std::numbers::pi * 0.5 / 850e-9);
  const Gridd ratio = v.abs() / u.abs();
  CHECK((ratio - 1.0).abs().maxCoeff() < 4 * std::numeric_limits<double>::epsilon());
}

TEST_CASE("phase delay matches the scalar formula") {
  const double eta = 1.46, lambda = 850e-9, h = 0.3e-6;
  DOEProfile<double> doe(Gridd::Constant(4, 4, h), eta, 16, 1e-6, lambda);
  const auto out = apply_doe(laser_field<double>(4, 1e-6, lambda), doe);
  const double phi = 2 * std::numbers::pi * (eta - 1) * h / lambda;
  CHECK(std::arg(out.values()(1, 2)) == doctest::Approx(phi).epsilon(1e-12));
  CHECK(doe.max_height() == doctest::Approx(lambda / (eta - 1)));
}

TEST_CASE("adding a full-wave height leaves the far field unchanged") {
  const double eta = 1.5, lambda = 850e-9;
  const double hmax = lambda / (eta - 1);
  const double k = 2 * std::numbers::pi * (eta - 1) / lambda;
  const Gridd h = random_grid(64, 64, 21, 0, hmax);
  const CGridd laser = laser_field<double>(64, 1e-3 / 64, lambda).values();
  const Gridd a = centered_dft2(apply_phase_delay<double>(laser, h, k)).abs2();
  const Gridd b = centered_dft2(apply_phase_delay<double>(laser, Gridd(h + hmax), k)).abs2();
  CHECK((a - b).abs().maxCoeff() < 1e-9);
}

TEST_CASE("camera scale factor with the prototype constants") {
  CameraRig rig;
  const double s = camera_scale_factor(rig, 1e-6, 1000, 850e-9);
  CHECK(std::abs(s - 1.0392) <= 1e-4);
  const double near = camera_scale_factor_at_depth(rig, 1e-6, 1000, 850e-9, 0.4);
  const double far = camera_scale_factor_at_depth(rig, 1e-6, 1000, 850e-9, 3.0);
  CHECK(near == doctest::Approx(s).epsilon(1e-14));
  CHECK(far == doctest::Approx(s).epsilon(1e-14));
}

TEST_CASE("Catmull-Rom rescale: identity at scale 1, adjoint consistent") {
  const Gridd x = random_grid(20, 20, 8);
  CHECK((bicubic_rescale<double>(x, 1.0) - x).abs().maxCoeff() < 1e-15);
  const Gridd y = random_grid(20, 20, 9);
  const double lhs = (bicubic_rescale<double>(x, 1.0392) * y).sum();
  const double rhs = (x * bicubic_rescale_adjoint<double>(y, 1.0392)).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  CHECK(catmull_rom(0.0) == 1.0);
  CHECK(catmull_rom(1.0) == 0.0);
  CHECK(catmull_rom(2.0) == 0.0);
}

TEST_CASE("resampling a pattern twice is rejected") {
  CameraRig rig;
  const auto doe = random_doe<double>(16, 1.5, 16, 1e-3 / 16, 850e-9, 1);
  const auto p = simulate_pattern(doe, rig);
  CHECK(p.camera_resampled);
  CHECK_THROWS_AS(resample_to_camera(p, rig), ContractError);
}

TEST_CASE("quantization is idempotent and wraps the top level") {
  const auto doe = random_doe<double>(32, 1.5, 16, 1e-6, 850e-9, 4);
  const auto q = quantize_heights(doe);
  const auto qq = quantize_heights(q);
  CHECK((q.heights() - qq.heights()).abs().maxCoeff() == 0.0);
  const double step = doe.max_height() / 16;
  for (Eigen::Index i = 0; i < q.heights().size(); ++i) {
    const double k = q.heights()(i) / step;
    CHECK(std::abs(k - std::round(k)) < 1e-9);
    CHECK(q.heights()(i) < doe.max_height());
    // nearest level on the circle
    const double d = std::abs(q.heights()(i) - doe.heights()(i));
    CHECK(std::min(d, doe.max_height() - d) <= step / 2 + 1e-18);
  }
  DOEProfile<double> top(Gridd::Constant(2, 2, doe.max_height() * 0.99), 1.5, 16, 1e-6, 850e-9);
  CHECK(quantize_heights(top).heights()(0, 0) == 0.0);
}

TEST_CASE("zeroth-order leakage keeps total energy") {
  const auto doe = random_doe<double>(16, 1.5, 16, 1e-6, 850e-9, 2);
  const auto p = field_intensity(propagate_far_field(apply_doe(laser_field<double>(16, 1e-6, 850e-9), doe)));
  const auto z = add_zeroth_order(p, 0.3);
  CHECK(z.intensity.sum() == doctest::Approx(p.intensity.sum()).epsilon(1e-12));
  CHECK_THROWS_AS(add_zeroth_order(p, 1.5), ConfigError);
}

TEST_CASE("circular aperture zeroes the corners") {
  const auto f = laser_field<double>(16, 1e-6, 850e-9, true);
  CHECK(std::abs(f.values()(0, 0)) == 0.0);
  CHECK(std::abs(f.values()(8, 8)) == 1.0);
}

TEST_CASE("invalid inputs") {
  CHECK_THROWS_AS(DOEProfile<double>(Gridd::Zero(4, 4), 1.0, 16, 1e-6, 850e-9), ConfigError);
  CHECK_THROWS_AS(DOEProfile<double>(Gridd::Zero(4, 4), 0.8, 16, 1e-6, 850e-9), ConfigError);
  CHECK_THROWS_AS(ComplexField<double>(CGridd::Zero(4, 5), 1e-6, 850e-9), ShapeError);
  CGridd bad = CGridd::Ones(4, 4);
  bad(1, 1) = std::complex<double>(std::nan(""), 0);
  CHECK_THROWS_AS(propagate_far_field(ComplexField<double>(bad, 1e-6, 850e-9)), NumericError);
  const auto doe = random_doe<double>(8, 1.5, 16, 2e-6, 850e-9, 1);
  CHECK_THROWS_AS(apply_doe(laser_field<double>(8, 1e-6, 850e-9), doe), ShapeError);
  CHECK_THROWS_AS(apply_doe(laser_field<double>(16, 2e-6, 850e-9), doe), ShapeError);
}

TEST_CASE("single precision path agrees with double") {
  const auto d = random_doe<double>(32, 1.5, 16, 1e-3 / 32, 850e-9, 3);
  const auto f = DOEProfile<float>(d.heights().cast<float>(), 1.5f, 16, 1e-3f / 32, 850e-9f);
  CameraRig rig;
  const Gridd pd = simulate_pattern(d, rig).intensity;
  const Gridf pf = simulate_pattern(f, rig).intensity;
  CHECK((pf.cast<double>() - pd).abs().maxCoeff() < 1e-3 * pd.maxCoeff());
}
