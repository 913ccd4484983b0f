#include "astereo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace astereo::diff {

namespace {

double evaluate(const Composite& f, const Gridd& x) {
  Tape tape;
  const Var leaf = tape.leaf(x);
  const Var out = f(tape, leaf);
  if (out.value().size() != 1) throw ContractError("check_gradients: composite must return a scalar");
  return out.value()(0, 0);
}

}  // namespace

GradCheckReport check_gradients(const Composite& f, const Gridd& x0, const GradCheckOptions& options) {
  const double f0 = evaluate(f, x0);
  if (evaluate(f, x0) != f0) throw ContractError("check_gradients: composite is not deterministic");

  Gridd adjoint;
  {
    Tape tape;
    const Var leaf = tape.leaf(x0);
    const Var out = f(tape, leaf);
    adjoint = tape.backward(out, std::span<const Var>(&leaf, 1)).front();
  }

  std::vector<long> coords(static_cast<std::size_t>(x0.size()));
  std::iota(coords.begin(), coords.end(), 0L);
  if (options.exclude) {
    require_same_shape(*options.exclude, x0, "check_gradients exclude mask");
    std::erase_if(coords, [&](long i) { return (*options.exclude)(i) != 0; });
  }
  std::mt19937_64 rng(options.seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  if (static_cast<int>(coords.size()) > options.num_probes) coords.resize(static_cast<std::size_t>(options.num_probes));

  double gmax = 0;
  for (long i : coords) gmax = std::max(gmax, std::abs(adjoint(i)));
  const double floor = 1e-6 * (1.0 + gmax);

  GradCheckReport report;
  double total = 0;
  for (long i : coords) {
    auto central = [&](double h) {
      Gridd xp = x0, xm = x0;
      xp(i) += h;
      xm(i) -= h;
      return (evaluate(f, xp) - evaluate(f, xm)) / (2 * h);
    };
    const double fd = central(options.step);
    const double fd_half = central(options.step / 2);
    const double scale = std::max({std::abs(fd), std::abs(fd_half), floor});
    if (std::abs(fd - fd_half) > options.kink_tolerance * scale) {
      ++report.kinks;
      report.kink_indices.push_back(i);
      continue;
    }
    const double a = adjoint(i);
    const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor});
    report.max_rel = std::max(report.max_rel, rel);
    total += rel;
    ++report.compared;
  }
  report.mean_rel = report.compared > 0 ? total / report.compared : 0.0;
  return report;
}

}  // namespace astereo::diff
