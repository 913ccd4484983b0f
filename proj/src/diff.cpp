#include "astereo/diff.hpp"

#include <cmath>
#include <memory>

#include "astereo/fft.hpp"
#include "astereo/interp.hpp"
#include "astereo/matcher_kernels.hpp"
#include "astereo/scenesim.hpp"

namespace astereo::diff {

// ---- tape ----------------------------------------------------------------------------------------

void Tape::check_open() const {
  if (finished_) throw LifecycleError("tape already consumed by a backward pass");
}

void Tape::check_owned(const Var& v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) throw ContractError("value does not belong to this tape");
}

Var Tape::leaf(Gridd value, int slices) {
  check_open();
  nodes_.push_back(Node{std::move(value), Gridd(), true, nullptr, slices});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Gridd value, int slices) {
  check_open();
  nodes_.push_back(Node{std::move(value), Gridd(), false, nullptr, slices});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Gridd value, std::initializer_list<Var> inputs, Adjoint adjoint, int slices) {
  check_open();
  bool needs = false;
  for (const Var& in : inputs) {
    check_owned(in);
    needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Gridd(), needs, needs ? std::move(adjoint) : nullptr, slices});
  return Var(this, nodes_.size() - 1);
}

Gridd Tape::grad(const Var& v) const {
  check_owned(v);
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Gridd::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(const Var& target, const Gridd& contribution) {
  Node& n = nodes_[target.id()];
  if (!n.requires_grad) return;
  require_same_shape(n.value, contribution, "adjoint accumulation");
  if (n.grad.size() == 0) {
    n.grad = contribution;
  } else {
    n.grad += contribution;
  }
}

std::vector<Gridd> Tape::backward(const Var& loss, std::span<const Var> leaves) {
  check_open();
  check_owned(loss);
  for (const Var& l : leaves) check_owned(l);
  if (nodes_[loss.id()].value.size() != 1) throw ContractError("backward: loss must be a scalar");
  finished_ = true;
  if (nodes_[loss.id()].requires_grad) {
    nodes_[loss.id()].grad = Gridd::Ones(1, 1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.adjoint || n.grad.size() == 0) continue;
      n.adjoint(*this, n.grad);
    }
  }
  std::vector<Gridd> out;
  out.reserve(leaves.size());
  for (const Var& l : leaves) {
    const Node& n = nodes_[l.id()];
    out.push_back(n.grad.size() == 0 ? Gridd::Zero(n.value.rows(), n.value.cols()) : n.grad);
  }
  return out;
}

// ---- elementwise and reductions ----------------------------------------------------------------

namespace {

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw ContractError("uninitialized value");
  return *a.tape();
}

void same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw ContractError("values recorded on different tapes");
}

}  // namespace

Var add(const Var& a, const Var& b) {
  same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  return tape_of(a).record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Gridd& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  }, a.slices());
}

Var sub(const Var& a, const Var& b) {
  same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  return tape_of(a).record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Gridd& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  }, a.slices());
}

Var mul(const Var& a, const Var& b) {
  same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  return tape_of(a).record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Gridd& g) {
    t.accumulate(a, g * b.value());
    t.accumulate(b, g * a.value());
  }, a.slices());
}

Var scale(const Var& a, double s) {
  return tape_of(a).record(a.value() * s, {a}, [a, s](Tape& t, const Gridd& g) { t.accumulate(a, g * s); },
                           a.slices());
}

Var add_scalar(const Var& a, double s) {
  return tape_of(a).record(a.value() + s, {a}, [a](Tape& t, const Gridd& g) { t.accumulate(a, g); }, a.slices());
}

Var sum(const Var& a) {
  return tape_of(a).record(Gridd::Constant(1, 1, a.value().sum()), {a}, [a](Tape& t, const Gridd& g) {
    t.accumulate(a, Gridd::Constant(a.value().rows(), a.value().cols(), g(0, 0)));
  });
}

Var reslice(const Var& a, int slices) {
  if (slices < 1 || a.value().rows() % slices != 0) throw ShapeError("reslice: rows not divisible by the slice count");
  return tape_of(a).record(a.value(), {a}, [a](Tape& t, const Gridd& g) { t.accumulate(a, g); }, slices);
}

Var mean(const Var& a) {
  const auto n = static_cast<double>(a.value().size());
  return tape_of(a).record(Gridd::Constant(1, 1, a.value().mean()), {a}, [a, n](Tape& t, const Gridd& g) {
    t.accumulate(a, Gridd::Constant(a.value().rows(), a.value().cols(), g(0, 0) / n));
  });
}

Var squared_error(const Var& a, const Gridd& target) {
  require_same_shape(a.value(), target, "squared_error");
  const Gridd r = a.value() - target;
  return tape_of(a).record(Gridd::Constant(1, 1, (r * r).sum()), {a}, [a, r](Tape& t, const Gridd& g) {
    t.accumulate(a, 2.0 * g(0, 0) * r);
  });
}

Var masked_mae(const Var& est, const Gridd& target, const Gridd& mask) {
  require_same_shape(est.value(), target, "masked_mae");
  require_same_shape(est.value(), mask, "masked_mae");
  const Gridd valid = (mask != 0).cast<double>();
  const double n = valid.sum();
  if (n <= 0) throw ContractError("masked_mae: empty mask");
  const Gridd r = est.value() - target;
  const Gridd sgn = r.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }) * valid;
  const double loss = (r.abs() * valid).sum() / n;
  return tape_of(est).record(Gridd::Constant(1, 1, loss), {est}, [est, sgn, n](Tape& t, const Gridd& g) {
    t.accumulate(est, sgn * (g(0, 0) / n));
  });
}

// ---- wave optics ----------------------------------------------------------------------------------

ComplexVar complex_constant(Tape& tape, const CGridd& field) {
  return ComplexVar{tape.constant(field.real()), tape.constant(field.imag())};
}

ComplexVar apply_phase_delay(const ComplexVar& field, const Var& heights, double phase_per_height) {
  same_tape(field.re, heights);
  require_same_shape(field.re.value(), heights.value(), "apply_phase_delay");
  const Gridd phase = heights.value() * phase_per_height;
  const Gridd c = phase.cos(), s = phase.sin();
  const Gridd& re = field.re.value();
  const Gridd& im = field.im.value();
  Tape& t = tape_of(heights);
  const Gridd out_re = re * c - im * s;
  const Gridd out_im = re * s + im * c;
  // The real part carries no adjoint of its own; the imaginary output reads both cotangents.
  Var vre = t.record(out_re, {field.re, field.im, heights}, [](Tape&, const Gridd&) {});
  const auto id_re = vre.id();
  Var vim = t.record(out_im, {field.re, field.im, heights},
                     [field, heights, c, s, out_re, out_im, phase_per_height, id_re](Tape& tp, const Gridd& gi) {
                       const Gridd gr = tp.grad(Var(&tp, id_re));
                       tp.accumulate(field.re, gr * c + gi * s);
                       tp.accumulate(field.im, -gr * s + gi * c);
                       tp.accumulate(heights, phase_per_height * (gi * out_re - gr * out_im));
                     });
  return ComplexVar{vre, vim};
}

namespace {

ComplexVar record_transform(const ComplexVar& field, bool inverse) {
  same_tape(field.re, field.im);
  CGridd u(field.re.value().rows(), field.re.value().cols());
  u.real() = field.re.value();
  u.imag() = field.im.value();
  const CGridd out = inverse ? centered_idft2(std::move(u)) : centered_dft2(std::move(u));
  Tape& t = tape_of(field.re);
  Var vre = t.record(out.real(), {field.re, field.im}, [](Tape&, const Gridd&) {});
  const auto id_re = vre.id();
  Var vim = t.record(out.imag(), {field.re, field.im}, [field, inverse, id_re](Tape& tp, const Gridd& gi) {
    CGridd g(gi.rows(), gi.cols());
    g.real() = tp.grad(Var(&tp, id_re));
    g.imag() = gi;
    // unitary: adjoint == inverse
    const CGridd back = inverse ? centered_dft2(std::move(g)) : centered_idft2(std::move(g));
    tp.accumulate(field.re, back.real());
    tp.accumulate(field.im, back.imag());
  });
  return ComplexVar{vre, vim};
}

}  // namespace

ComplexVar dft2(const ComplexVar& field) { return record_transform(field, false); }
ComplexVar idft2(const ComplexVar& field) { return record_transform(field, true); }

Var squared_magnitude(const ComplexVar& field) {
  same_tape(field.re, field.im);
  const Gridd& re = field.re.value();
  const Gridd& im = field.im.value();
  return tape_of(field.re).record(re * re + im * im, {field.re, field.im}, [field](Tape& t, const Gridd& g) {
    t.accumulate(field.re, 2.0 * g * field.re.value());
    t.accumulate(field.im, 2.0 * g * field.im.value());
  });
}

Var bicubic_rescale(const Var& pattern, double scale) {
  return tape_of(pattern).record(astereo::bicubic_rescale<double>(pattern.value(), scale), {pattern},
                                 [pattern, scale](Tape& t, const Gridd& g) {
                                   t.accumulate(pattern, astereo::bicubic_rescale_adjoint<double>(g, scale));
                                 });
}

Var clamp_nonnegative(const Var& a) {
  return tape_of(a).record(a.value().max(0.0), {a}, [a](Tape& t, const Gridd& g) {
    t.accumulate(a, (a.value() > 0).select(g, 0.0));
  });
}

Var add_zeroth_order(const Var& pattern, double kappa) {
  const Gridd& p = pattern.value();
  const Eigen::Index c = p.rows() / 2, cc = p.cols() / 2;
  Gridd out = (1 - kappa) * p;
  out(c, cc) += kappa * p.sum();
  return tape_of(pattern).record(std::move(out), {pattern}, [pattern, kappa, c, cc](Tape& t, const Gridd& g) {
    Gridd back = (1 - kappa) * g + kappa * g(c, cc);
    t.accumulate(pattern, back);
  });
}

// ---- scene synthesis ------------------------------------------------------------------------------

Var warp_rows(const Var& src, const Var& disp, const Gridd& mask, double shift) {
  same_tape(src, disp);
  auto out = astereo::warp_rows<double>(src.value(), disp.value(), mask, shift);
  return tape_of(src).record(std::move(out), {src, disp}, [src, disp, mask, shift](Tape& t, const Gridd& g) {
    Gridd gs, gd;
    astereo::warp_rows_adjoint<double>(src.value(), disp.value(), mask, shift, g, src.requires_grad() ? &gs : nullptr,
                                       disp.requires_grad() ? &gd : nullptr);
    if (src.requires_grad()) t.accumulate(src, gs);
    if (disp.requires_grad()) t.accumulate(disp, gd);
  });
}

Var radiometry_clamp(const Var& p_view, const Var& refl, const CaptureConfig& cfg, const Gridd& noise) {
  same_tape(p_view, refl);
  require_same_shape(p_view.value(), refl.value(), "radiometry_clamp");
  require_same_shape(p_view.value(), noise, "radiometry_clamp");
  const Gridd pre = cfg.gamma * (cfg.alpha + cfg.beta * p_view.value()) * refl.value() + noise;
  const Gridd inside = ((pre > cfg.clip_lo) && (pre < cfg.clip_hi)).cast<double>();
  Gridd out = pre.max(cfg.clip_lo).min(cfg.clip_hi);
  const double gamma = cfg.gamma, alpha = cfg.alpha, beta = cfg.beta;
  return tape_of(p_view).record(std::move(out), {p_view, refl},
                                [p_view, refl, inside, gamma, alpha, beta](Tape& t, const Gridd& g) {
                                  const Gridd gi = g * inside;
                                  t.accumulate(p_view, gi * gamma * beta * refl.value());
                                  t.accumulate(refl, gi * gamma * (alpha + beta * p_view.value()));
                                });
}

// ---- matcher ----------------------------------------------------------------------------------------

Var patch_features(const Var& image, int radius) {
  const int side = 2 * radius + 1;
  return tape_of(image).record(kernels::patch_features<double>(image.value(), radius), {image},
                               [image, radius](Tape& t, const Gridd& g) {
                                 t.accumulate(image, kernels::patch_features_adjoint<double>(g, image.value(), radius));
                               },
                               side * side);
}

Var conv_features(const Var& image, const Var& kern, const Var& bias) {
  same_tape(image, kern);
  same_tape(image, bias);
  const Gridd& k = kern.value();
  if (k.rows() % k.cols() != 0 || k.cols() % 2 == 0) throw ShapeError("conv_features: kernels must be (C*K) x K, K odd");
  const auto channels = static_cast<int>(k.rows() / k.cols());
  if (bias.value().rows() != channels || bias.value().cols() != 1) throw ShapeError("conv_features: bias must be C x 1");
  return tape_of(image).record(kernels::conv_features<double>(image.value(), k, bias.value()), {image, kern, bias},
                               [image, kern, bias](Tape& t, const Gridd& g) {
                                 Gridd gi, gk, gb;
                                 kernels::conv_features_adjoint<double>(
                                     image.value(), kern.value(), g, image.requires_grad() ? &gi : nullptr,
                                     kern.requires_grad() ? &gk : nullptr, bias.requires_grad() ? &gb : nullptr);
                                 if (image.requires_grad()) t.accumulate(image, gi);
                                 if (kern.requires_grad()) t.accumulate(kern, gk);
                                 if (bias.requires_grad()) t.accumulate(bias, gb);
                               },
                               channels);
}

Var cost_volume(const Var& ref, const Var& other, int d_count, int window) {
  same_tape(ref, other);
  require_same_shape(ref.value(), other.value(), "cost_volume");
  if (ref.slices() != other.slices()) throw ShapeError("cost_volume: channel counts differ");
  const Eigen::Index h = ref.value().rows() / ref.slices();
  if (d_count < 1) throw RangeError("cost_volume: need at least one disparity");
  if (d_count >= ref.value().cols()) throw RangeError("cost_volume: disparity range must be below the image width");
  return tape_of(ref).record(kernels::cost_volume<double>(ref.value(), other.value(), h, d_count, window), {ref, other},
                             [ref, other, h, d_count, window](Tape& t, const Gridd& g) {
                               Gridd gr, go;
                               kernels::cost_volume_adjoint<double>(ref.value(), other.value(), h, d_count, window, g,
                                                                    ref.requires_grad() ? &gr : nullptr,
                                                                    other.requires_grad() ? &go : nullptr);
                               if (ref.requires_grad()) t.accumulate(ref, gr);
                               if (other.requires_grad()) t.accumulate(other, go);
                             },
                             d_count);
}

Var fuse_volumes(const Var& wide, const Var& narrow, double ratio) {
  same_tape(wide, narrow);
  if (!(ratio > 0)) throw ConfigError("fuse_volumes: baseline ratio must be positive");
  const Eigen::Index h = wide.value().rows() / wide.slices();
  if (narrow.value().rows() / narrow.slices() != h || narrow.value().cols() != wide.value().cols()) {
    throw ShapeError("fuse_volumes: volume footprints differ");
  }
  if (narrow.slices() < kernels::narrow_slices_needed(wide.slices(), ratio)) {
    throw RangeError("fuse_volumes: narrow volume does not cover the scaled disparity range");
  }
  const int d_narrow = narrow.slices();
  return tape_of(wide).record(kernels::fuse_volumes<double>(wide.value(), narrow.value(), h, ratio), {wide, narrow},
                              [wide, narrow, h, d_narrow, ratio](Tape& t, const Gridd& g) {
                                t.accumulate(wide, g);
                                if (narrow.requires_grad()) {
                                  t.accumulate(narrow, kernels::fuse_volumes_adjoint_narrow<double>(g, h, d_narrow, ratio));
                                }
                              },
                              wide.slices());
}

Var soft_regress(const Var& volume, double temperature) {
  if (!(temperature > 0)) throw ConfigError("soft_regress: temperature must be positive");
  const Eigen::Index h = volume.value().rows() / volume.slices();
  Gridd prob = kernels::softmax_probabilities<double>(volume.value(), h, temperature);
  Gridd out = kernels::expected_disparity<double>(prob, h);
  auto saved = std::make_shared<const std::pair<Gridd, Gridd>>(std::move(prob), out);
  return tape_of(volume).record(std::move(out), {volume}, [volume, saved, h, temperature](Tape& t, const Gridd& g) {
    t.accumulate(volume, kernels::soft_regress_adjoint<double>(saved->first, saved->second, h, temperature, g));
  });
}

}  // namespace astereo::diff
