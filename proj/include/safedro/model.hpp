#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace safedro {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Closed axis-aligned box [lower, upper].
struct BoxRegion {
  Vector lower;
  Vector upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool empty() const { return (upper.array() < lower.array()).any(); }
};

/// Marker for the whole domain [0, M]^m.
struct WholeDomain {};

using Region = std::variant<BoxRegion, WholeDomain>;

/// A confidence set T_i with signed level eps_i: P(T_i) >= eps_i for eps_i > 0,
/// P(T_i) <= -eps_i for eps_i < 0.
struct ConfidenceSet {
  Region region;
  double eps = 0.0;
};

/// Moment/confidence ambiguity set on the domain [0, domain_edge]^dim.
struct AmbiguitySpec {
  int dim = 0;
  double domain_edge = 0.0;
  Vector mean;
  Matrix cov;
  double eps_mu = 0.0;
  double eps_sigma = 1.0;
  double threshold = 0.0;
  std::vector<ConfidenceSet> confidence_sets;

  /// Entries 0 and 1 of confidence_sets: the normalization pair.
  static std::vector<ConfidenceSet> normalization_pair() {
    return {{WholeDomain{}, -1.0}, {WholeDomain{}, 1.0}};
  }
};

enum class RowSense { kLessEqual, kEqual, kGreaterEqual };

/// Linear row coeffs . v {sense} rhs.
struct LinearRow {
  Vector coeffs;
  RowSense sense = RowSense::kLessEqual;
  double rhs = 0.0;
};

/// Case 1: boxes are fixed. Heights are either the fixed vector
/// `SimpleFunctionSpec::heights` or decisions maximizing `objective . x` over
/// the polytope described by `rows`.
struct FixedBoxes {
  struct HeightPolytope {
    Vector objective;
    std::vector<LinearRow> rows;
  };
  std::vector<BoxRegion> boxes;
  std::optional<HeightPolytope> free_heights;
};

/// Case 2: heights are fixed, boxes [x-_i, x+_i] are decisions.
struct VariableBoxes {
  enum class Objective { kWidthSum, kLinear };
  Objective objective = Objective::kWidthSum;
  bool maximize = false;
  /// k x m coefficient matrices for the linear objective.
  Matrix c_minus;
  Matrix c_plus;
  /// Rows of C over (x-, x+): coeff_minus : x- + coeff_plus : x+ {sense} rhs.
  struct BoxRow {
    Matrix coeff_minus;
    Matrix coeff_plus;
    RowSense sense = RowSense::kLessEqual;
    double rhs = 0.0;
  };
  std::vector<BoxRow> box_rows;
};

struct SimpleFunctionSpec {
  /// Heights x_i (fixed in Case 2 and in Case 1 without a height polytope;
  /// a starting guess otherwise).
  Vector heights;
  std::variant<FixedBoxes, VariableBoxes> mode;

  int k() const { return static_cast<int>(heights.size()); }
  bool is_fixed() const { return std::holds_alternative<FixedBoxes>(mode); }
  bool is_variable() const { return std::holds_alternative<VariableBoxes>(mode); }
  const FixedBoxes& fixed() const { return std::get<FixedBoxes>(mode); }
  const VariableBoxes& variable() const { return std::get<VariableBoxes>(mode); }
};

/// The sample set delta * Z^m intersected with [0, M]^m, row-major with the
/// last axis varying fastest.
class Lattice {
 public:
  Lattice() = default;
  Lattice(double edge, int dim, double step);

  double step() const { return step_; }
  double edge() const { return edge_; }
  int dim() const { return dim_; }
  /// Points per axis, M/delta + 1.
  int per_axis() const { return per_axis_; }
  std::size_t size() const { return size_; }

  /// Multi-index of the flat point id.
  std::vector<int> index_of(std::size_t id) const;
  std::size_t id_of(const std::vector<int>& index) const;
  Vector point(std::size_t id) const;
  /// Neighbour of `id` one step forward along `axis`, or nullopt past M.
  std::optional<std::size_t> forward(std::size_t id, int axis) const;
  /// Coordinate of grid index `i` along any axis.
  double coord(int i) const { return step_ * i; }
  /// Nearest grid index of a coordinate (no range check).
  int nearest_index(double x) const { return static_cast<int>(std::lround(x / step_)); }
  bool aligned(double x, double tol = 1e-9) const;

  /// Starting points t_0 of the lines along `axis` (points with index 0 on that axis).
  std::vector<std::size_t> line_starts(int axis) const;
  /// All points of the line through `start` along `axis`, in increasing order.
  std::vector<std::size_t> line(std::size_t start, int axis) const;

 private:
  double edge_ = 0.0;
  double step_ = 0.0;
  int dim_ = 0;
  int per_axis_ = 0;
  std::size_t size_ = 0;
  std::vector<std::size_t> strides_;
};

Lattice lattice_points(double edge, int dim, double step);

struct Tolerances {
  double alignment = 1e-9;
  double psd = 1e-8;
};

struct ValidationReport {
  struct Item {
    std::string check;
    bool passed = true;
    std::string message;
  };
  std::vector<Item> items;

  bool passed() const {
    return std::all_of(items.begin(), items.end(), [](const Item& i) { return i.passed; });
  }
  std::vector<std::string> failures() const;
};

ValidationReport validate_spec(const AmbiguitySpec& spec, const SimpleFunctionSpec& fn,
                               const Lattice& lattice, const Tolerances& tol = {});

/// True if every point of the domain has a lattice point within sqrt(m)*delta
/// carrying the same membership pattern in all `regions`. Regions must be
/// lattice-aligned; the first offending face representative is returned otherwise.
std::optional<Vector> level_set_gap(const std::vector<BoxRegion>& regions, const Lattice& lattice);

BoxRegion as_box(const Region& region, int dim, double edge);

// ---------------------------------------------------------------------------
// Moment matrices and indicators. Templated on the scalar of `t` so they can
// be evaluated on expressions and autodiff-style types alike.

namespace detail {
inline void check_dim(Eigen::Index got, int want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (got " +
                                std::to_string(got) + ", expected " + std::to_string(want) + ")");
  }
}
}  // namespace detail

/// [[Sigma, t - mu], [(t - mu)^T, eps_mu]].
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> first_moment_block(
    const Eigen::MatrixBase<Derived>& t, const AmbiguitySpec& spec) {
  using Scalar = typename Derived::Scalar;
  detail::check_dim(t.size(), spec.dim, "first_moment_block");
  const int m = spec.dim;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> block(m + 1, m + 1);
  block.topLeftCorner(m, m) = spec.cov.template cast<Scalar>();
  const auto d = (t - spec.mean.template cast<Scalar>()).eval();
  block.topRightCorner(m, 1) = d;
  block.bottomLeftCorner(1, m) = d.transpose();
  block(m, m) = Scalar(spec.eps_mu);
  return block;
}

/// (t - mu)(t - mu)^T.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> second_moment_outer(
    const Eigen::MatrixBase<Derived>& t, const AmbiguitySpec& spec) {
  using Scalar = typename Derived::Scalar;
  detail::check_dim(t.size(), spec.dim, "second_moment_outer");
  const auto d = (t - spec.mean.template cast<Scalar>()).eval();
  return d * d.transpose();
}

/// Polynomial part of a sampled dual row:
/// q(t) = -<first_moment_block(t), Y1> + <second_moment_outer(t), Y2>.
template <typename Derived>
typename Derived::Scalar poly_part(const Eigen::MatrixBase<Derived>& t, const Matrix& y1,
                                   const Matrix& y2, const AmbiguitySpec& spec) {
  using Scalar = typename Derived::Scalar;
  detail::check_dim(y1.rows(), spec.dim + 1, "poly_part Y1");
  detail::check_dim(y2.rows(), spec.dim, "poly_part Y2");
  const auto block = first_moment_block(t, spec);
  const auto outer = second_moment_outer(t, spec);
  return -(block.cwiseProduct(y1.template cast<Scalar>())).sum() +
         (outer.cwiseProduct(y2.template cast<Scalar>())).sum();
}

/// Closed-box membership.
template <typename Derived>
int indicator_box(const Eigen::MatrixBase<Derived>& t, const BoxRegion& box) {
  detail::check_dim(t.size(), box.dim(), "indicator_box");
  for (Eigen::Index j = 0; j < t.size(); ++j) {
    if (t(j) < box.lower(j) || t(j) > box.upper(j)) return 0;
  }
  return 1;
}

/// Upper continuous approximator of the box indicator: product over axes of
/// a tent equal to 1 on [lo, hi] and falling linearly to 0 at distance delta.
template <typename Derived>
typename Derived::Scalar smoothed_indicator(const Eigen::MatrixBase<Derived>& t, const BoxRegion& box,
                                            double delta) {
  using Scalar = typename Derived::Scalar;
  detail::check_dim(t.size(), box.dim(), "smoothed_indicator");
  if (box.empty()) return Scalar(0);
  Scalar value(1);
  for (Eigen::Index j = 0; j < t.size(); ++j) {
    using std::max;
    // Point-to-set distance along this axis.
    const Scalar dist = max(max(Scalar(box.lower(j)) - t(j), t(j) - Scalar(box.upper(j))), Scalar(0));
    value *= max(Scalar(1) - dist / Scalar(delta), Scalar(0));
  }
  return value;
}

/// Lower continuous approximator: 1 at depth >= delta inside the box, 0 on and
/// outside its boundary.
template <typename Derived>
typename Derived::Scalar inner_smoothed_indicator(const Eigen::MatrixBase<Derived>& t,
                                                  const BoxRegion& box, double delta) {
  using Scalar = typename Derived::Scalar;
  detail::check_dim(t.size(), box.dim(), "inner_smoothed_indicator");
  if (box.empty()) return Scalar(0);
  Scalar value(1);
  for (Eigen::Index j = 0; j < t.size(); ++j) {
    using std::max;
    using std::min;
    const Scalar depth = min(t(j) - Scalar(box.lower(j)), Scalar(box.upper(j)) - t(j));
    value *= min(max(depth / Scalar(delta), Scalar(0)), Scalar(1));
  }
  return value;
}

/// Sign of a confidence level; eps is never zero for a valid set.
inline double sign_of(double eps) { return eps > 0 ? 1.0 : -1.0; }

/// Exact indicator of a confidence region.
template <typename Derived>
int region_indicator(const Eigen::MatrixBase<Derived>& t, const Region& region) {
  if (std::holds_alternative<WholeDomain>(region)) return 1;
  return indicator_box(t, std::get<BoxRegion>(region));
}

}  // namespace safedro
