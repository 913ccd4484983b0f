#pragma once

#include <Eigen/SparseCore>

#include <cmath>
#include <vector>

#include "astereo/grid.hpp"

namespace astereo {

/// Cubic convolution kernel with a = -0.5 (Catmull-Rom).
template <typename Scalar>
Scalar catmull_rom(Scalar t) {
  constexpr Scalar a = Scalar(-0.5);
  t = std::abs(t);
  if (t <= Scalar(1)) return ((a + 2) * t - (a + 3)) * t * t + 1;
  if (t < Scalar(2)) return ((a * t - 5 * a) * t + 8 * a) * t - 4 * a;
  return Scalar(0);
}

/**
 * 1-D bicubic scaling operator as a sparse (n x n) matrix. Output sample x reads the source at
 * c + scale * (x - c) with c = n/2; taps outside [0, n) contribute zero.
 */
template <typename Scalar>
Eigen::SparseMatrix<Scalar, Eigen::RowMajor> bicubic_scale_matrix(Eigen::Index n, Scalar scale) {
  std::vector<Eigen::Triplet<Scalar>> taps;
  taps.reserve(static_cast<std::size_t>(4 * n));
  const Scalar c = static_cast<Scalar>(n / 2);
  for (Eigen::Index x = 0; x < n; ++x) {
    const Scalar src = c + scale * (static_cast<Scalar>(x) - c);
    const Scalar base = std::floor(src);
    const Scalar frac = src - base;
    const auto i0 = static_cast<Eigen::Index>(base);
    for (int k = -1; k <= 2; ++k) {
      const Eigen::Index i = i0 + k;
      if (i < 0 || i >= n) continue;
      const Scalar w = catmull_rom(frac - static_cast<Scalar>(k));
      if (w != Scalar(0)) taps.emplace_back(x, i, w);
    }
  }
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> m(n, n);
  m.setFromTriplets(taps.begin(), taps.end());
  return m;
}

/// Scale a square grid about its center by `scale` with Catmull-Rom interpolation and zero padding.
template <typename Scalar>
Grid<Scalar> bicubic_rescale(const Grid<Scalar>& src, Scalar scale) {
  if (src.rows() != src.cols()) throw ShapeError("bicubic_rescale: grid must be square");
  const auto r = bicubic_scale_matrix<Scalar>(src.rows(), scale);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tmp = r * src.matrix();
  return (tmp * r.transpose()).array();
}

/// Adjoint of bicubic_rescale with respect to the source grid.
template <typename Scalar>
Grid<Scalar> bicubic_rescale_adjoint(const Grid<Scalar>& cot, Scalar scale) {
  if (cot.rows() != cot.cols()) throw ShapeError("bicubic_rescale_adjoint: grid must be square");
  const auto r = bicubic_scale_matrix<Scalar>(cot.rows(), scale);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tmp =
      r.transpose() * cot.matrix();
  return (tmp * r).array();
}

/**
 * Horizontal disparity warp with linear interpolation and zero padding:
 *   out(y, x) = mask(y, x) * src(y, x - shift * disp(y, x)).
 */
template <typename Scalar>
Grid<Scalar> warp_rows(const Grid<Scalar>& src, const Grid<Scalar>& disp, const Grid<Scalar>& mask,
                       Scalar shift) {
  require_same_shape(src, disp, "warp_rows");
  require_same_shape(src, mask, "warp_rows");
  const Eigen::Index h = src.rows(), w = src.cols();
  Grid<Scalar> out = Grid<Scalar>::Zero(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      const Scalar m = mask(y, x);
      if (m == Scalar(0)) continue;
      const Scalar u = static_cast<Scalar>(x) - shift * disp(y, x);
      const Scalar base = std::floor(u);
      const Scalar a = u - base;
      const auto i0 = static_cast<Eigen::Index>(base);
      Scalar v = 0;
      if (i0 >= 0 && i0 < w) v += (1 - a) * src(y, i0);
      if (i0 + 1 >= 0 && i0 + 1 < w) v += a * src(y, i0 + 1);
      out(y, x) = m * v;
    }
  }
  return out;
}

/// Vector-Jacobian products of warp_rows with respect to the source and the disparity.
template <typename Scalar>
void warp_rows_adjoint(const Grid<Scalar>& src, const Grid<Scalar>& disp, const Grid<Scalar>& mask,
                       Scalar shift, const Grid<Scalar>& cot, Grid<Scalar>* grad_src,
                       Grid<Scalar>* grad_disp) {
  const Eigen::Index h = src.rows(), w = src.cols();
  if (grad_src) *grad_src = Grid<Scalar>::Zero(h, w);
  if (grad_disp) *grad_disp = Grid<Scalar>::Zero(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      const Scalar g = mask(y, x) * cot(y, x);
      if (g == Scalar(0)) continue;
      const Scalar u = static_cast<Scalar>(x) - shift * disp(y, x);
      const Scalar base = std::floor(u);
      const Scalar a = u - base;
      const auto i0 = static_cast<Eigen::Index>(base);
      const bool in0 = i0 >= 0 && i0 < w;
      const bool in1 = i0 + 1 >= 0 && i0 + 1 < w;
      if (grad_src) {
        if (in0) (*grad_src)(y, i0) += (1 - a) * g;
        if (in1) (*grad_src)(y, i0 + 1) += a * g;
      }
      if (grad_disp) {
        const Scalar s0 = in0 ? src(y, i0) : Scalar(0);
        const Scalar s1 = in1 ? src(y, i0 + 1) : Scalar(0);
        (*grad_disp)(y, x) += -shift * g * (s1 - s0);
      }
    }
  }
}

/// Bilinear image resize (pixel-center aligned, edge clamped).
template <typename Scalar>
Grid<Scalar> bilinear_resize(const Grid<Scalar>& src, Eigen::Index rows, Eigen::Index cols) {
  Grid<Scalar> out(rows, cols);
  const Scalar sy = static_cast<Scalar>(src.rows()) / static_cast<Scalar>(rows);
  const Scalar sx = static_cast<Scalar>(src.cols()) / static_cast<Scalar>(cols);
  auto clampi = [](Eigen::Index v, Eigen::Index n) { return std::min(std::max(v, Eigen::Index{0}), n - 1); };
  for (Eigen::Index y = 0; y < rows; ++y) {
    const Scalar fy = std::max(Scalar(0), (static_cast<Scalar>(y) + Scalar(0.5)) * sy - Scalar(0.5));
    const auto y0 = static_cast<Eigen::Index>(std::floor(fy));
    const Scalar ay = fy - static_cast<Scalar>(y0);
    for (Eigen::Index x = 0; x < cols; ++x) {
      const Scalar fx = std::max(Scalar(0), (static_cast<Scalar>(x) + Scalar(0.5)) * sx - Scalar(0.5));
      const auto x0 = static_cast<Eigen::Index>(std::floor(fx));
      const Scalar ax = fx - static_cast<Scalar>(x0);
      const auto ya = clampi(y0, src.rows()), yb = clampi(y0 + 1, src.rows());
      const auto xa = clampi(x0, src.cols()), xb = clampi(x0 + 1, src.cols());
      out(y, x) = (1 - ay) * ((1 - ax) * src(ya, xa) + ax * src(ya, xb)) +
                  ay * ((1 - ax) * src(yb, xa) + ax * src(yb, xb));
    }
  }
  return out;
}

}  // namespace astereo
