#pragma once

#include "safedro/assemble.hpp"
#include "safedro/conic.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace safedro {

struct SearchOptions {
  enum class Mode { kBnb, kEnumerate, kBoth };
  enum class Branching { kMostFractional, kLineGuided };
  Mode mode = Mode::kBnb;
  long node_limit = 200000;
  /// Seconds.
  double time_limit = 600.0;
  /// Absolute objective gap at which a node is pruned.
  double gap_tol = 1e-6;
  Branching branching = Branching::kLineGuided;
  /// A box decision is accepted when the largest uniform slack of the sampled
  /// rows is at least -feas_tol.
  double feas_tol = 1e-8;
  SolverOptions solver;
  /// key=value progress lines; nullptr disables logging.
  std::ostream* log = nullptr;
  /// Emit a progress line every this many nodes.
  long log_every = 100;
};

/// Y1, Y2 and the confidence multipliers of a feasible decision.
struct DualVars {
  Matrix y1;
  Matrix y2;
  Vector y;
};

struct Incumbent {
  enum class Status { kFeasible, kInfeasible, kNoSolution };
  enum class Proof { kOptimal, kGapLimit, kResourceLimit };
  Status status = Status::kNoSolution;
  Proof proof = Proof::kResourceLimit;
  double objective = 0.0;
  /// Proven bound on the optimum (a lower bound when minimizing).
  double best_bound = 0.0;
  std::vector<BoxRegion> boxes;
  std::vector<bool> empty;
  Vector heights;
  std::vector<GridBox> grid;
  DualVars dual_vars;
  /// Smallest slack of the sampled rows under dual_vars.
  double min_slack = 0.0;
  long node_count = 0;
  long sdp_solves = 0;
  double wall_time = 0.0;
};

const char* to_string(Incumbent::Status status);
const char* to_string(Incumbent::Proof proof);

class InstanceTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Branch-and-bound on the b-tilde binaries with SDP relaxations.
Incumbent solve_bnb(const AssembledModel& model, const SearchOptions& opts = {});

/// Exact search over lattice-aligned boxes in objective order. Requires k <= 2,
/// m <= 2 and at most 26 points per axis; throws InstanceTooLarge otherwise.
Incumbent enumerate_boxes(const AssembledModel& model, const SearchOptions& opts = {});

/// Dispatches on opts.mode. In kBoth mode the branch-and-bound result is
/// returned and a disagreement with the enumeration is reported in `warnings`.
Incumbent solve_case2(const AssembledModel& model, const SearchOptions& opts, std::vector<std::string>* warnings);

/// Case 1: a single SDP. The incumbent carries the fixed boxes, the heights
/// (solved or given) and the moment multipliers.
Incumbent solve_case1(const AssembledModel& model, const SolverOptions& opts = {});

/// The model with binaries relaxed to [0, 1].
SdpSolution root_relaxation(const AssembledModel& model, const SolverOptions& opts = {});

/// Scalar values and PSD values of the full model at the incumbent: the
/// canonical encoding of its boxes plus its dual variables.
std::pair<Vector, std::vector<Matrix>> incumbent_point(const AssembledModel& model, const Incumbent& inc);

}  // namespace safedro
