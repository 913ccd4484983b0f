#pragma once

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <vector>

#include "astereo/grid.hpp"

namespace astereo {

namespace detail {

// Centered 1-D transform along every row (Axis 1) or every column (Axis 0), in place.
// The zero index of the transform sits at n/2 on both sides.
template <typename Scalar>
void centered_dft_axis(CGrid<Scalar>& g, int axis, bool inverse) {
  using C = std::complex<Scalar>;
  const Eigen::Index n = axis == 1 ? g.cols() : g.rows();
  const Eigen::Index lines = axis == 1 ? g.rows() : g.cols();
  const Eigen::Index c = n / 2;
  Eigen::FFT<Scalar> fft;
  fft.SetFlag(Eigen::FFT<Scalar>::Unscaled);
  std::vector<C> in(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
  const Scalar norm = Scalar(1) / std::sqrt(static_cast<Scalar>(n));
  for (Eigen::Index l = 0; l < lines; ++l) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index src = (j + c) % n;  // ifftshift
      in[static_cast<std::size_t>(j)] = axis == 1 ? g(l, src) : g(src, l);
    }
    if (inverse) {
      fft.inv(out, in);
    } else {
      fft.fwd(out, in);
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::Index src = (k + n - c) % n;  // fftshift
      const C v = out[static_cast<std::size_t>(src)] * norm;
      if (axis == 1) {
        g(l, k) = v;
      } else {
        g(k, l) = v;
      }
    }
  }
}

}  // namespace detail

/// Centered unitary 2-D DFT: F[k] = n^-1/2 sum_j x[j] exp(-2 pi i (k-c)(j-c)/n), c = n/2 per axis.
template <typename Scalar>
CGrid<Scalar> centered_dft2(CGrid<Scalar> g) {
  detail::centered_dft_axis(g, 1, false);
  detail::centered_dft_axis(g, 0, false);
  return g;
}

/// Inverse (and adjoint) of centered_dft2.
template <typename Scalar>
CGrid<Scalar> centered_idft2(CGrid<Scalar> g) {
  detail::centered_dft_axis(g, 1, true);
  detail::centered_dft_axis(g, 0, true);
  return g;
}

}  // namespace astereo
