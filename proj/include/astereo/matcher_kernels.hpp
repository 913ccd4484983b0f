#pragma once

// Forward and adjoint kernels of the matcher. Volumes and feature maps stack their slices
// vertically: a C x H x W map is a (C*H) x W grid.

#include <algorithm>
#include <cmath>
#include <limits>

#include "astereo/grid.hpp"

namespace astereo::kernels {

inline Eigen::Index clampi(Eigen::Index v, Eigen::Index n) {
  return std::min(std::max(v, Eigen::Index{0}), n - 1);
}

template <typename Scalar>
auto slice(Grid<Scalar>& g, Eigen::Index k, Eigen::Index h) {
  return g.block(k * h, 0, h, g.cols());
}
template <typename Scalar>
auto slice(const Grid<Scalar>& g, Eigen::Index k, Eigen::Index h) {
  return g.block(k * h, 0, h, g.cols());
}

/// Window sum with replicated borders, separable.
template <typename Scalar>
Grid<Scalar> box_sum(const Grid<Scalar>& a, int radius) {
  if (radius == 0) return a;
  const Eigen::Index h = a.rows(), w = a.cols();
  Grid<Scalar> t = Grid<Scalar>::Zero(h, w), out = Grid<Scalar>::Zero(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x)
      for (int j = -radius; j <= radius; ++j) t(y, x) += a(y, clampi(x + j, w));
  for (Eigen::Index y = 0; y < h; ++y)
    for (int i = -radius; i <= radius; ++i) out.row(y) += t.row(clampi(y + i, h));
  return out;
}

template <typename Scalar>
Grid<Scalar> box_sum_adjoint(const Grid<Scalar>& cot, int radius) {
  if (radius == 0) return cot;
  const Eigen::Index h = cot.rows(), w = cot.cols();
  Grid<Scalar> t = Grid<Scalar>::Zero(h, w), out = Grid<Scalar>::Zero(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (int i = -radius; i <= radius; ++i) t.row(clampi(y + i, h)) += cot.row(y);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x)
      for (int j = -radius; j <= radius; ++j) out(y, clampi(x + j, w)) += t(y, x);
  return out;
}

/// Mean-removed neighbourhood: channel (dy, dx) = img(y+dy, x+dx) - local mean.
template <typename Scalar>
Grid<Scalar> centered_patches(const Grid<Scalar>& img, int radius) {
  const Eigen::Index h = img.rows(), w = img.cols();
  const int side = 2 * radius + 1;
  const int channels = side * side;
  const Grid<Scalar> local_mean = box_sum(img, radius) / static_cast<Scalar>(channels);
  Grid<Scalar> out(channels * h, w);
  int c = 0;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx, ++c) {
      for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index x = 0; x < w; ++x)
          out(c * h + y, x) = img(clampi(y + dy, h), clampi(x + dx, w)) - local_mean(y, x);
    }
  }
  return out;
}

template <typename Scalar>
Grid<Scalar> centered_patches_adjoint(const Grid<Scalar>& cot, Eigen::Index h, int radius) {
  const Eigen::Index w = cot.cols();
  const int side = 2 * radius + 1;
  const int channels = side * side;
  Grid<Scalar> grad = Grid<Scalar>::Zero(h, w);
  Grid<Scalar> mean_cot = Grid<Scalar>::Zero(h, w);
  int c = 0;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx, ++c) {
      for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index x = 0; x < w; ++x) {
          const Scalar g = cot(c * h + y, x);
          grad(clampi(y + dy, h), clampi(x + dx, w)) += g;
          mean_cot(y, x) += g;
        }
    }
  }
  grad -= box_sum_adjoint<Scalar>(mean_cot, radius) / static_cast<Scalar>(channels);
  return grad;
}

/// Regularizer under the descriptor norm; keeps flat (unlit) patches finite.
inline constexpr double kPatchEpsilon = 1e-4;

/// sqrt(sum_c m_c^2 + eps) per pixel.
template <typename Scalar>
Grid<Scalar> patch_norm(const Grid<Scalar>& centered, Eigen::Index h) {
  const Eigen::Index channels = centered.rows() / h;
  Grid<Scalar> s = Grid<Scalar>::Constant(h, centered.cols(), static_cast<Scalar>(kPatchEpsilon));
  for (Eigen::Index c = 0; c < channels; ++c) s += slice(centered, c, h).square();
  return s.sqrt();
}

/// Mean-removed neighbourhood divided by its norm, so descriptors ignore local gain and offset.
template <typename Scalar>
Grid<Scalar> patch_features(const Grid<Scalar>& img, int radius) {
  const Eigen::Index h = img.rows();
  Grid<Scalar> m = centered_patches(img, radius);
  const Grid<Scalar> n = patch_norm(m, h);
  for (Eigen::Index c = 0; c < m.rows() / h; ++c) slice(m, c, h) /= n;
  return m;
}

template <typename Scalar>
Grid<Scalar> patch_features_adjoint(const Grid<Scalar>& cot, const Grid<Scalar>& img, int radius) {
  const Eigen::Index h = img.rows();
  const Grid<Scalar> m = centered_patches(img, radius);
  const Grid<Scalar> n = patch_norm(m, h);
  const Eigen::Index channels = m.rows() / h;
  Grid<Scalar> dot = Grid<Scalar>::Zero(h, img.cols());
  for (Eigen::Index c = 0; c < channels; ++c) dot += slice(cot, c, h) * slice(m, c, h);
  const Grid<Scalar> n3 = n.cube();
  Grid<Scalar> gm(m.rows(), m.cols());
  for (Eigen::Index c = 0; c < channels; ++c) {
    slice(gm, c, h) = slice(cot, c, h) / n - slice(m, c, h) * dot / n3;
  }
  return centered_patches_adjoint<Scalar>(gm, h, radius);
}

/// out_c = K_c * img + b_c with replicated borders; kernels (C*K) x K, bias C x 1.
template <typename Scalar>
Grid<Scalar> conv_features(const Grid<Scalar>& img, const Grid<Scalar>& kernels, const Grid<Scalar>& bias) {
  const Eigen::Index h = img.rows(), w = img.cols();
  const Eigen::Index k = kernels.cols();
  const Eigen::Index channels = kernels.rows() / k;
  const Eigen::Index r = k / 2;
  Grid<Scalar> out(channels * h, w);
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (Eigen::Index y = 0; y < h; ++y) {
      for (Eigen::Index x = 0; x < w; ++x) {
        Scalar acc = bias(c, 0);
        for (Eigen::Index i = 0; i < k; ++i)
          for (Eigen::Index j = 0; j < k; ++j) acc += kernels(c * k + i, j) * img(clampi(y + i - r, h), clampi(x + j - r, w));
        out(c * h + y, x) = acc;
      }
    }
  }
  return out;
}

template <typename Scalar>
void conv_features_adjoint(const Grid<Scalar>& img, const Grid<Scalar>& kernels, const Grid<Scalar>& cot,
                           Grid<Scalar>* grad_img, Grid<Scalar>* grad_kernels, Grid<Scalar>* grad_bias) {
  const Eigen::Index h = img.rows(), w = img.cols();
  const Eigen::Index k = kernels.cols();
  const Eigen::Index channels = kernels.rows() / k;
  const Eigen::Index r = k / 2;
  if (grad_img) *grad_img = Grid<Scalar>::Zero(h, w);
  if (grad_kernels) *grad_kernels = Grid<Scalar>::Zero(kernels.rows(), k);
  if (grad_bias) *grad_bias = Grid<Scalar>::Zero(channels, 1);
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (Eigen::Index y = 0; y < h; ++y) {
      for (Eigen::Index x = 0; x < w; ++x) {
        const Scalar g = cot(c * h + y, x);
        if (grad_bias) (*grad_bias)(c, 0) += g;
        for (Eigen::Index i = 0; i < k; ++i) {
          const Eigen::Index yy = clampi(y + i - r, h);
          for (Eigen::Index j = 0; j < k; ++j) {
            const Eigen::Index xx = clampi(x + j - r, w);
            if (grad_kernels) (*grad_kernels)(c * k + i, j) += g * img(yy, xx);
            if (grad_img) (*grad_img)(yy, xx) += g * kernels(c * k + i, j);
          }
        }
      }
    }
  }
}

/// Per-pixel channel-summed absolute difference for disparity d, before window aggregation.
template <typename Scalar>
Grid<Scalar> abs_difference(const Grid<Scalar>& ref, const Grid<Scalar>& other, Eigen::Index h, int d) {
  const Eigen::Index w = ref.cols();
  const Eigen::Index channels = ref.rows() / h;
  Grid<Scalar> diff = Grid<Scalar>::Zero(h, w);
  for (Eigen::Index c = 0; c < channels; ++c)
    for (Eigen::Index y = 0; y < h; ++y)
      for (Eigen::Index x = 0; x < w; ++x)
        diff(y, x) += std::abs(ref(c * h + y, x) - other(c * h + y, clampi(x - d, w)));
  return diff;
}

/// cost[d](x, y) = window-sum of sum_c |ref_c(x, y) - other_c(x - d, y)|, out-of-range columns replicated.
template <typename Scalar>
Grid<Scalar> cost_volume(const Grid<Scalar>& ref, const Grid<Scalar>& other, Eigen::Index h, int d_count, int window) {
  const Eigen::Index w = ref.cols();
  Grid<Scalar> vol(d_count * h, w);
  for (int d = 0; d < d_count; ++d) slice(vol, d, h) = box_sum<Scalar>(abs_difference(ref, other, h, d), window / 2);
  return vol;
}

template <typename Scalar>
void cost_volume_adjoint(const Grid<Scalar>& ref, const Grid<Scalar>& other, Eigen::Index h, int d_count, int window,
                         const Grid<Scalar>& cot, Grid<Scalar>* grad_ref, Grid<Scalar>* grad_other) {
  const Eigen::Index w = ref.cols();
  const Eigen::Index channels = ref.rows() / h;
  if (grad_ref) *grad_ref = Grid<Scalar>::Zero(ref.rows(), w);
  if (grad_other) *grad_other = Grid<Scalar>::Zero(other.rows(), w);
  for (int d = 0; d < d_count; ++d) {
    const Grid<Scalar> gd = box_sum_adjoint<Scalar>(slice(cot, d, h), window / 2);
    for (Eigen::Index c = 0; c < channels; ++c)
      for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index x = 0; x < w; ++x) {
          const Eigen::Index xo = clampi(x - d, w);
          const Scalar diff = ref(c * h + y, x) - other(c * h + y, xo);
          const Scalar s = diff > 0 ? Scalar(1) : (diff < 0 ? Scalar(-1) : Scalar(0));
          if (grad_ref) (*grad_ref)(c * h + y, x) += s * gd(y, x);
          if (grad_other) (*grad_other)(c * h + y, xo) -= s * gd(y, x);
        }
  }
}

/// Narrow slices needed to fuse d_count wide slices at baseline ratio.
inline int narrow_slices_needed(int d_count, double ratio) {
  return static_cast<int>(std::ceil(static_cast<double>(d_count - 1) / ratio - 1e-12)) + 1;
}

template <typename Scalar>
Grid<Scalar> fuse_volumes(const Grid<Scalar>& wide, const Grid<Scalar>& narrow, Eigen::Index h, double ratio) {
  const auto d_wide = static_cast<int>(wide.rows() / h);
  const auto d_narrow = static_cast<int>(narrow.rows() / h);
  Grid<Scalar> out = wide;
  for (int d = 0; d < d_wide; ++d) {
    const double dh = static_cast<double>(d) / ratio;
    const int i0 = static_cast<int>(std::floor(dh));
    const auto a = static_cast<Scalar>(dh - i0);
    slice(out, d, h) += (1 - a) * slice(narrow, i0, h);
    if (a > 0 && i0 + 1 < d_narrow) slice(out, d, h) += a * slice(narrow, i0 + 1, h);
  }
  return out;
}

template <typename Scalar>
Grid<Scalar> fuse_volumes_adjoint_narrow(const Grid<Scalar>& cot, Eigen::Index h, int d_narrow, double ratio) {
  const auto d_wide = static_cast<int>(cot.rows() / h);
  Grid<Scalar> g = Grid<Scalar>::Zero(d_narrow * h, cot.cols());
  for (int d = 0; d < d_wide; ++d) {
    const double dh = static_cast<double>(d) / ratio;
    const int i0 = static_cast<int>(std::floor(dh));
    const auto a = static_cast<Scalar>(dh - i0);
    slice(g, i0, h) += (1 - a) * slice(cot, d, h);
    if (a > 0 && i0 + 1 < d_narrow) slice(g, i0 + 1, h) += a * slice(cot, d, h);
  }
  return g;
}

/// Softmax probabilities over the slices of -cost / temperature.
template <typename Scalar>
Grid<Scalar> softmax_probabilities(const Grid<Scalar>& vol, Eigen::Index h, double temperature) {
  const auto d_count = vol.rows() / h;
  const Eigen::Index w = vol.cols();
  const auto inv_t = static_cast<Scalar>(1.0 / temperature);
  Grid<Scalar> p(vol.rows(), w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      Scalar best = std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index d = 0; d < d_count; ++d) best = std::min(best, vol(d * h + y, x));
      Scalar z = 0;
      for (Eigen::Index d = 0; d < d_count; ++d) {
        const Scalar e = std::exp(-(vol(d * h + y, x) - best) * inv_t);
        p(d * h + y, x) = e;
        z += e;
      }
      for (Eigen::Index d = 0; d < d_count; ++d) p(d * h + y, x) /= z;
    }
  }
  return p;
}

template <typename Scalar>
Grid<Scalar> expected_disparity(const Grid<Scalar>& prob, Eigen::Index h) {
  const auto d_count = prob.rows() / h;
  Grid<Scalar> out = Grid<Scalar>::Zero(h, prob.cols());
  for (Eigen::Index d = 1; d < d_count; ++d) out += static_cast<Scalar>(d) * slice(prob, d, h);
  return out;
}

template <typename Scalar>
Grid<Scalar> soft_regress(const Grid<Scalar>& vol, Eigen::Index h, double temperature) {
  return expected_disparity(softmax_probabilities(vol, h, temperature), h);
}

/// d out / d cost[d] = -p_d (d - out) / T, scaled by the cotangent.
template <typename Scalar>
Grid<Scalar> soft_regress_adjoint(const Grid<Scalar>& prob, const Grid<Scalar>& out, Eigen::Index h,
                                  double temperature, const Grid<Scalar>& cot) {
  const auto d_count = prob.rows() / h;
  const auto inv_t = static_cast<Scalar>(1.0 / temperature);
  Grid<Scalar> g(prob.rows(), prob.cols());
  for (Eigen::Index d = 0; d < d_count; ++d)
    slice(g, d, h) = -inv_t * cot * slice(prob, d, h) * (static_cast<Scalar>(d) - out);
  return g;
}

}  // namespace astereo::kernels
