#pragma once

#include "safedro/model.hpp"

#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace safedro {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarKind { kFree, kNonneg, kBinary };

struct ScalarVar {
  std::string name;
  VarKind kind = VarKind::kFree;
  double lower = -kInf;
  double upper = kInf;
};

struct PsdVar {
  std::string name;
  int dim = 0;
};

/// <coeff, X_var>_F for a PSD variable.
struct PsdTerm {
  int var = 0;
  Matrix coeff;
};

/// sum a_j x_j + sum <A_k, X_k> {sense} rhs.
struct LinearConstraint {
  std::vector<std::pair<int, double>> scalar_terms;
  std::vector<PsdTerm> psd_terms;
  RowSense sense = RowSense::kGreaterEqual;
  double rhs = 0.0;
  std::string tag;
};

/// sum x_j F_j + constant >= 0 in the semidefinite order.
struct LmiConstraint {
  std::vector<std::pair<int, Matrix>> terms;
  Matrix constant;
  std::string tag;
};

struct Objective {
  bool maximize = false;
  std::vector<std::pair<int, double>> scalar_terms;
  std::vector<PsdTerm> psd_terms;
  double offset = 0.0;
};

struct ConicProgram {
  std::vector<ScalarVar> scalars;
  std::vector<PsdVar> psd_vars;
  std::vector<LinearConstraint> rows;
  std::vector<LmiConstraint> lmis;
  Objective objective;

  int add_scalar(std::string name, VarKind kind = VarKind::kFree, double lower = -kInf, double upper = kInf);
  int add_binary(std::string name) { return add_scalar(std::move(name), VarKind::kBinary, 0.0, 1.0); }
  int add_psd(std::string name, int dim);
  int add_row(LinearConstraint row);
  int add_lmi(LmiConstraint lmi);

  int num_binaries() const;
  /// Throws std::invalid_argument on undeclared variables, shape errors,
  /// asymmetric matrix data or binaries inside LMIs.
  void check() const;
};

/// Per-variable bounds replacing the declared ones (B&B fixings).
using BoundOverrides = std::vector<std::pair<double, double>>;

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kNumericalFailure };

const char* to_string(SolveStatus status);

struct SolverOptions {
  int max_iterations = 200;
  double feastol = 1e-9;
  double abstol = 1e-9;
  double reltol = 1e-9;
  /// Accept a stalled iterate as optimal when it is within this factor of the
  /// tolerances above.
  double stall_factor = 100.0;
  bool verbose = false;
};

struct KktResiduals {
  /// Largest violation of any row, bound or cone constraint (>= 0).
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  /// Sum of multiplier * slack over all constraints.
  double complementarity_gap = 0.0;
  std::vector<double> psd_min_eig;
  std::vector<double> lmi_min_eig;
};

/// Row duals follow the minimization form (objective negated when maximizing):
/// stationarity reads c = sum_r dual_r a_r + sum_l <Z_l, F_l> + lower - upper,
/// with dual_r >= 0 on >= rows, <= 0 on <= rows, free on equalities.
struct SdpSolution {
  SolveStatus status = SolveStatus::kNumericalFailure;
  Vector scalar_values;
  std::vector<Matrix> psd_values;
  Vector row_duals;
  std::vector<Matrix> lmi_duals;
  std::vector<Matrix> psd_duals;
  Vector lower_bound_duals;
  Vector upper_bound_duals;
  double objective = 0.0;
  double dual_objective = 0.0;
  int iterations = 0;
  KktResiduals kkt;
};

SdpSolution solve_sdp(const ConicProgram& p, const SolverOptions& opts = {}, const BoundOverrides* bounds = nullptr,
                      bool relax_binaries = false);

/// Residuals of `sol` measured against the declared bounds (or `bounds`).
KktResiduals kkt_residuals(const ConicProgram& p, const SdpSolution& sol, const BoundOverrides* bounds = nullptr);

/// Value of a row's left-hand side.
double row_activity(const LinearConstraint& row, const Vector& scalars, const std::vector<Matrix>& psd);

/// Sparse text dump, one record per line:
///   var <id> <name> <kind> <lower> <upper>
///   psd <id> <name> <dim>
///   obj <min|max> <offset>
///   row <id> <ge|le|eq> <rhs> <tag>
/// followed by `s <var> <coeff>` and `p <var> <i> <j> <coeff>` term lines
/// (upper triangle), and `lmi <id> <dim> <tag>` with `c <i> <j> <v>` for the
/// constant and `f <var> <i> <j> <v>` for coefficient matrices.
void dump_program(const ConicProgram& p, std::ostream& out);

}  // namespace safedro
