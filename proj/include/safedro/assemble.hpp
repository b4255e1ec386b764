#pragma once

#include "safedro/conic.hpp"
#include "safedro/lipschitz.hpp"
#include "safedro/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace safedro {

struct AssemblyOptions {
  /// Explicit rows Tr(Y1) <= tr_y1_max and Tr(Y2) <= tr_y2_max, which make L a
  /// valid Lipschitz constant for every feasible point.
  std::optional<double> tr_y1_max;
  std::optional<double> tr_y2_max;
  /// Replaces L * delta * sqrt(m) (testing hook).
  std::optional<double> margin_override;

  static AssemblyOptions from(const LipschitzCertificate& cert) {
    AssemblyOptions o;
    o.tr_y1_max = cert.tr_y1_max;
    o.tr_y2_max = cert.tr_y2_max;
    return o;
  }
};

/// Program variable ids. Per-box/per-direction tables are indexed [i][j] and
/// per-point tables [i][t] or [i][j][t] with t the flat lattice id.
struct VarIndex {
  int y1 = -1;
  int y2 = -1;
  std::vector<int> y;
  std::vector<int> heights;
  std::vector<std::vector<int>> btilde;
  std::vector<std::vector<std::vector<int>>> delta_minus;
  std::vector<std::vector<std::vector<int>>> delta_plus;
  std::vector<std::vector<int>> x_minus;
  std::vector<std::vector<int>> x_plus;
  std::vector<std::vector<int>> width_aux;
};

struct AssembledModel {
  enum class Kind { kFixedBoxes, kVariableBoxes };
  Kind kind = Kind::kFixedBoxes;
  ConicProgram program;
  VarIndex var_index;
  double L = 0.0;
  double margin = 0.0;
  Lattice lattice;
  AmbiguitySpec spec;
  SimpleFunctionSpec fn;
  int threshold_row = -1;
  std::vector<int> sampled_rows;
};

/// Tags of generated rows.
namespace row_tag {
inline constexpr const char* kThreshold = "threshold";
inline constexpr const char* kSampled = "sampled";
inline constexpr const char* kTraceCap = "trace_cap";
inline constexpr const char* kHeights = "height_polytope";
inline constexpr const char* kJump = "jump";
inline constexpr const char* kJumpCount = "jump_count";
inline constexpr const char* kLowerEdge = "lower_edge";
inline constexpr const char* kUpperEdge = "upper_edge";
inline constexpr const char* kWidthJumps = "width_jumps";
inline constexpr const char* kWidthLine = "width_line";
inline constexpr const char* kWidthOrder = "width_order";
inline constexpr const char* kWidthAux = "width_aux";
inline constexpr const char* kBoxSide = "box_side";
}  // namespace row_tag

AssembledModel assemble_case1(const AmbiguitySpec& spec, const SimpleFunctionSpec& fn, const Lattice& lattice,
                              double L, const AssemblyOptions& opts = {});

AssembledModel assemble_case2(const AmbiguitySpec& spec, const SimpleFunctionSpec& fn, const Lattice& lattice,
                              double L, const AssemblyOptions& opts = {});

struct DecodedBoxes {
  std::vector<BoxRegion> boxes;
  /// Boxes without any marked lattice point; their entry is the width-0
  /// sentinel at the origin.
  std::vector<bool> empty;
  std::vector<std::string> warnings;
};

/// Reads boxes off the b-tilde values (rounded at 0.5). Throws
/// std::runtime_error if the marked points of a box do not form a box.
DecodedBoxes decode_box(const AssembledModel& model, const Vector& scalar_values);

/// Lattice index range [lo, hi] per axis; an empty box has no range.
struct GridBox {
  std::vector<int> lo, hi;
  bool empty = false;
};

GridBox to_grid(const BoxRegion& box, const Lattice& lattice);
BoxRegion from_grid(const GridBox& g, const Lattice& lattice);

/// Bounds fixing every binary to the canonical encoding of `boxes` (b-tilde
/// equals the indicator, jumps at the box edges) and x-/x+ to the box bounds.
BoundOverrides canonical_assignment(const AssembledModel& model, const std::vector<GridBox>& boxes);

/// Values of all scalars under the canonical assignment (other scalars 0).
Vector canonical_values(const AssembledModel& model, const std::vector<GridBox>& boxes);

/// Feasibility program for fixed boxes: maximize theta subject to the sampled
/// rows shifted by theta, the threshold row and the trace caps; theta <= 1.
struct SlackProgram {
  ConicProgram program;
  std::vector<int> sampled_rows;
  /// Ids of the confidence multipliers, in confidence-set order.
  std::vector<int> y;
  int theta = -1;
  double margin = 0.0;
  /// rhs of sampled row t is margin - contribution(t).
  void set_contribution(const Vector& contribution);
};

SlackProgram fixed_box_slack_program(const AssembledModel& model);

/// Per-lattice-point value of sum_i x_i * indicator of box i.
Vector box_contribution(const AssembledModel& model, const std::vector<GridBox>& boxes);

/// Edge coordinates per box. An empty box leaves x-/x+ unconstrained except
/// for 0 <= x- <= x+ <= M; its coordinates are the vertex of that triangle that
/// is best for the objective, per axis.
struct BoxCoords {
  std::vector<Vector> lower, upper;
};

BoxCoords box_coords(const AssembledModel& model, const std::vector<GridBox>& boxes);

/// Objective contribution of box i.
double box_objective_of(const AssembledModel& model, int i, const GridBox& box);

/// Objective of the box decision under the model's Case-2 objective.
double box_objective(const AssembledModel& model, const std::vector<GridBox>& boxes);

/// Whether the box decision satisfies the side constraints on (x-, x+).
bool box_side_feasible(const AssembledModel& model, const std::vector<GridBox>& boxes, double tol = 1e-9);

}  // namespace safedro
