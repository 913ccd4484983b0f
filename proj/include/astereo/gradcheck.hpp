#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "astereo/diff.hpp"

namespace astereo::diff {

/// Scalar-valued function of one leaf, evaluated by recording on the given tape.
using Composite = std::function<Var(Tape&, const Var& leaf)>;

struct GradCheckReport {
  double max_rel = 0;
  double mean_rel = 0;
  int compared = 0;
  /// Probes where central differences at step and step/2 disagree: the function has a kink
  /// within the stencil. Their adjoint values are reported but not compared.
  int kinks = 0;
  std::vector<long> kink_indices;
};

struct GradCheckOptions {
  int num_probes = 16;
  double step = 1e-5;
  std::uint64_t seed = 0;
  /// Two central differences disagreeing by more than this (relative) mark a kink.
  double kink_tolerance = 1e-5;
  /// Coordinates with a nonzero entry here are skipped (declared non-differentiable points).
  const Gridd* exclude = nullptr;
};

/**
 * Compare the adjoint gradient of `f` at `x0` with central finite differences at randomly drawn
 * coordinates. Relative error is |adjoint - fd| / max(|adjoint|, |fd|, floor) with
 * floor = 1e-6 * (1 + max |adjoint| over the probes).
 *
 * Throws ContractError if two evaluations at x0 disagree (non-deterministic composite).
 */
GradCheckReport check_gradients(const Composite& f, const Gridd& x0, const GradCheckOptions& options = {});

/// One line per entry of a gradcheck run, for the CLI report.
struct NamedGradCheck {
  std::string name;
  GradCheckReport report;
};

/// Checks every registered primitive plus the end-to-end composite on small random instances.
std::vector<NamedGradCheck> check_all_primitives(std::uint64_t seed = 7, int n = 16);

}  // namespace astereo::diff
