#pragma once

#include "safedro/conic.hpp"
#include "safedro/model.hpp"
#include "safedro/search.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace safedro {

/// A simple function sum_i heights_i * 1_{boxes_i}. Empty boxes have upper < lower.
struct Decision {
  std::vector<BoxRegion> boxes;
  Vector heights;
};

/// A box that contains no point.
BoxRegion empty_box(int dim);

/// The decision of a feasible incumbent, with its empty boxes made truly empty.
Decision decision_of(const Incumbent& inc);

/// sum_i heights_i * 1_{boxes_i}(t) with closed boxes.
double decision_value(const Decision& decision, const Vector& t);

struct OracleResult {
  /// kInfeasible when no discrete measure on the lattice lies in the ambiguity set.
  SolveStatus status = SolveStatus::kNumericalFailure;
  /// Smallest expectation of the decision over measures supported on the lattice.
  double value = 0.0;
  /// Weight of each lattice point in the minimizing measure.
  Vector weights;
};

/// Minimizes the expectation of the decision over probability measures
/// supported on `lattice` that satisfy the moment and confidence constraints of
/// `spec`. Measures on a lattice form a subfamily of the ambiguity set, so the
/// value bounds the true worst case from above: a value below the threshold
/// disproves robustness; a value above it is only a necessary condition.
OracleResult adversary_oracle(const Decision& decision, const AmbiguitySpec& spec, const Lattice& lattice,
                              const SolverOptions& opts = {});

/// Lower bound certified by the multipliers: sum_c eps_c y_c - eps_sigma <Sigma, Y2>.
double dual_objective(const DualVars& duals, const AmbiguitySpec& spec);

/// oracle_value - dual_objective; nonnegative by weak duality.
double weak_duality_gap(double dual_objective, double oracle_value);

/// Continuous surrogate of the dual constraint: heights times the upper box
/// approximators, plus the moment polynomial, minus the signed confidence
/// approximators times their multipliers.
double fc_value(const Vector& t, const Decision& decision, const DualVars& duals, const AmbiguitySpec& spec,
                double delta);

struct FcSample {
  double min = kInf;
  Vector argmin;
};

/// Minimum of fc_value over `n_samples` uniform points of [0, M]^m drawn from
/// a generator seeded with `seed`.
FcSample sample_fc(const Decision& decision, const DualVars& duals, const AmbiguitySpec& spec, double delta,
                   int n_samples, std::uint64_t seed);

struct Certificate {
  enum class Verdict { kCertified, kFalsified, kInconclusive };
  double worst_case_expectation = 0.0;
  double duality_gap = 0.0;
  double fc_min_sampled = 0.0;
  Vector fc_argmin;
  double fine_delta = 0.0;
  int samples = 0;
  Verdict verdict = Verdict::kInconclusive;
  std::vector<std::string> warnings;
};

const char* to_string(Certificate::Verdict verdict);

struct CertifyOptions {
  /// Step of the oracle lattice; 0 selects half the assembly step.
  double fine_delta = 0.0;
  int samples = 10000;
  std::uint64_t seed = 1;
  /// Tolerance of the threshold and f^c checks.
  double tol = 1e-6;
  SolverOptions solver;
};

/// Runs the oracle on the fine lattice and samples f^c. Certified needs an
/// oracle value >= b - tol and a sampled f^c minimum >= -tol on a lattice at
/// most half as coarse as `delta`; either check failing falsifies; a coarser
/// lattice or a failed oracle solve is inconclusive.
Certificate certify(const Decision& decision, const DualVars& duals, const AmbiguitySpec& spec, double delta,
                    const CertifyOptions& opts = {});

}  // namespace safedro
