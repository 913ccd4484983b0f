#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "astereo/grid.hpp"

namespace astereo {
struct CaptureConfig;
}

namespace astereo::diff {

class Tape;

/// Handle to a value recorded on a tape. Copyable; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Gridd& value() const;
  bool requires_grad() const;
  /// Number of stacked H x W slices (channels or disparities) in the value.
  int slices() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

using DiffValue = Var;

/**
 * Reverse-mode tape. Each recorded node keeps its forward value and an adjoint closure that reads
 * the node's cotangent and accumulates into its inputs. Nodes are appended in evaluation order,
 * so replaying the closures backwards visits them in reverse topological order.
 *
 * A tape serves exactly one backward pass; recording or differentiating afterwards throws
 * LifecycleError.
 */
class Tape {
 public:
  using Adjoint = std::function<void(Tape&, const Gridd& cotangent)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Gridd value, int slices = 1);
  Var constant(Gridd value, int slices = 1);
  Var scalar(double v) { return constant(Gridd::Constant(1, 1, v)); }

  /// Record a primitive output. The adjoint is kept only if some input requires a gradient.
  Var record(Gridd value, std::initializer_list<Var> inputs, Adjoint adjoint, int slices = 1);

  const Gridd& value(const Var& v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(const Var& v) const { return nodes_.at(v.id()).requires_grad; }
  int slices(const Var& v) const { return nodes_.at(v.id()).slices; }

  /// Cotangent accumulated so far at a node (zeros if nothing reached it).
  Gridd grad(const Var& v) const;
  void accumulate(const Var& target, const Gridd& contribution);

  /// d loss / d leaf for each leaf; consumes the tape.
  std::vector<Gridd> backward(const Var& loss, std::span<const Var> leaves);

  bool finished() const { return finished_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Gridd value;
    Gridd grad;
    bool requires_grad = false;
    Adjoint adjoint;
    int slices = 1;
  };

  void check_open() const;
  void check_owned(const Var& v) const;

  std::vector<Node> nodes_;
  bool finished_ = false;
};

inline const Gridd& Var::value() const { return tape_->value(*this); }
inline bool Var::requires_grad() const { return tape_->requires_grad(*this); }
inline int Var::slices() const { return tape_->slices(*this); }

// ---- elementwise and reductions -----------------------------------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var sum(const Var& a);
Var mean(const Var& a);
/// Identity that relabels the value as `slices` stacked H x W slices.
Var reslice(const Var& a, int slices);
/// sum((a - target)^2), scalar.
Var squared_error(const Var& a, const Gridd& target);
/// Mean of |est - target| over mask != 0; subgradient 0 where est == target. Scalar.
Var masked_mae(const Var& est, const Gridd& target, const Gridd& mask);

// ---- wave optics ---------------------------------------------------------------------------------

struct ComplexVar {
  Var re, im;
};

/// Constant complex field.
ComplexVar complex_constant(Tape& tape, const CGridd& field);
/// U * exp(i k h).
ComplexVar apply_phase_delay(const ComplexVar& field, const Var& heights, double phase_per_height);
/// Centered unitary 2-D DFT; the adjoint is the inverse transform of the cotangent.
ComplexVar dft2(const ComplexVar& field);
ComplexVar idft2(const ComplexVar& field);
/// |U|^2.
Var squared_magnitude(const ComplexVar& field);
/// Catmull-Rom scaling about the grid center (camera resampling).
Var bicubic_rescale(const Var& pattern, double scale);
/// max(a, 0); the gradient passes where a > 0.
Var clamp_nonnegative(const Var& a);
/// (1 - kappa) P + kappa sum(P) delta_center.
Var add_zeroth_order(const Var& pattern, double kappa);

// ---- scene synthesis -----------------------------------------------------------------------------

/// mask * src(x - shift * disp), differentiable in src and disp.
Var warp_rows(const Var& src, const Var& disp, const Gridd& mask, double shift);
/// clip(gamma (alpha + beta P) I + noise); straight-through inside the clip range, zero outside.
Var radiometry_clamp(const Var& p_view, const Var& refl, const CaptureConfig& cfg, const Gridd& noise);

// ---- matcher -------------------------------------------------------------------------------------

/// Mean-removed (2r+1)^2 neighbourhood as channels, divided by its norm.
Var patch_features(const Var& image, int radius);
/// Per-channel 2-D convolution (edge replicated) plus bias. kernels: (C*K) x K, bias: C x 1.
Var conv_features(const Var& image, const Var& kernels, const Var& bias);
/// cost[d] = window-sum over channels of |ref(x) - other(x - d)|, d in [0, d_count).
Var cost_volume(const Var& ref, const Var& other, int d_count, int window);
/// fused[d] = wide[d] + narrow[d / ratio] (linear between narrow slices).
Var fuse_volumes(const Var& wide, const Var& narrow, double ratio);
/// sum_d d softmax(-cost / temperature).
Var soft_regress(const Var& volume, double temperature);

}  // namespace astereo::diff
