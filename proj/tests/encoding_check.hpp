#pragma once

// Exhaustive check of the Case-2 box encoding on small grids.
//
// Every b-tilde pattern is enumerated. The rows of one axis only involve the
// binaries of single lattice lines plus x-, x+ of that axis, so each line is
// brute-forced over all of its jump assignments and the per-line outcomes are
// combined exactly: the rows bound x- from below, x+ from above and x+ - x-
// from below, and the existence of a combined choice reduces to a scan over
// candidate values of the two lower bounds.

#include "safedro/assemble.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace encoding_check {

using namespace safedro;

struct Report {
  long patterns = 0;
  long feasible_patterns = 0;
  long soundness_violations = 0;
  long boxes = 0;
  long completeness_violations = 0;
  std::string first_violation;
};

inline AssembledModel small_model(int dim, int points) {
  AmbiguitySpec spec;
  spec.dim = dim;
  spec.domain_edge = points - 1;
  spec.mean = Vector::Zero(dim);
  spec.cov = Matrix::Identity(dim, dim);
  spec.eps_mu = 1.0;
  spec.eps_sigma = 1.0;
  spec.threshold = 0.1;
  spec.confidence_sets = AmbiguitySpec::normalization_pair();
  SimpleFunctionSpec fn;
  fn.heights = Vector::Ones(1);
  fn.mode = VariableBoxes{};
  return assemble_case2(spec, fn, Lattice(points - 1, dim, 1.0), 1.0);
}

namespace detail {

constexpr double kTol = 1e-9;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPosInf = std::numeric_limits<double>::infinity();

// x- >= lo_minus, x+ <= hi_plus, x+ - x- >= lo_width.
struct Bounds {
  double lo_minus = kNegInf;
  double hi_plus = kPosInf;
  double lo_width = kNegInf;

  void meet(const Bounds& o) {
    lo_minus = std::max(lo_minus, o.lo_minus);
    hi_plus = std::min(hi_plus, o.hi_plus);
    lo_width = std::max(lo_width, o.lo_width);
  }
  bool operator<(const Bounds& o) const {
    return std::tie(lo_minus, hi_plus, lo_width) < std::tie(o.lo_minus, o.hi_plus, o.lo_width);
  }
};

bool holds(double lhs, RowSense sense, double rhs) {
  switch (sense) {
    case RowSense::kLessEqual: return lhs <= rhs + kTol;
    case RowSense::kGreaterEqual: return lhs >= rhs - kTol;
    case RowSense::kEqual: return std::abs(lhs - rhs) <= kTol;
  }
  return false;
}

// Folds `a x- + c x+ {sense} rhs` into `b`; false if the row has another shape.
bool fold(double a, double c, RowSense sense, double rhs, Bounds& b) {
  if (sense == RowSense::kEqual) return a == 0.0 && c == 0.0;
  const double s = sense == RowSense::kGreaterEqual ? 1.0 : -1.0;
  a *= s;
  c *= s;
  rhs *= s;
  // Now a x- + c x+ >= rhs.
  if (c == 0.0 && a > 0.0) {
    b.lo_minus = std::max(b.lo_minus, rhs / a);
  } else if (a == 0.0 && c < 0.0) {
    b.hi_plus = std::min(b.hi_plus, rhs / c);
  } else if (a < 0.0 && c == -a) {
    b.lo_width = std::max(b.lo_width, rhs / c);
  } else {
    return false;
  }
  return true;
}

enum class Role { kOther, kBtilde, kDeltaMinus, kDeltaPlus, kXMinus, kXPlus };

struct VarInfo {
  Role role = Role::kOther;
  int axis = -1;
  std::size_t point = 0;
};

struct LineRow {
  const LinearConstraint* row;
};

class Checker {
 public:
  explicit Checker(const AssembledModel& model) : model_(model), lattice_(model.lattice) {
    const auto& idx = model.var_index;
    const int m = lattice_.dim();
    info_.resize(model.program.scalars.size());
    for (std::size_t t = 0; t < lattice_.size(); ++t) info_[idx.btilde[0][t]] = {Role::kBtilde, -1, t};
    for (int j = 0; j < m; ++j) {
      for (std::size_t t = 0; t < lattice_.size(); ++t) {
        info_[idx.delta_minus[0][j][t]] = {Role::kDeltaMinus, j, t};
        info_[idx.delta_plus[0][j][t]] = {Role::kDeltaPlus, j, t};
      }
      info_[idx.x_minus[0][j]] = {Role::kXMinus, j, 0};
      info_[idx.x_plus[0][j]] = {Role::kXPlus, j, 0};
    }
    lines_.resize(m);
    line_rows_.resize(m);
    base_.assign(m, Bounds{});
    for (int j = 0; j < m; ++j) {
      for (const std::size_t s : lattice_.line_starts(j)) {
        line_of_start_[{j, s}] = static_cast<int>(lines_[j].size());
        lines_[j].push_back(lattice_.line(s, j));
      }
      line_rows_[j].resize(lines_[j].size());
      base_[j].lo_minus = model.program.scalars[idx.x_minus[0][j]].lower;
      base_[j].hi_plus = model.program.scalars[idx.x_plus[0][j]].upper;
    }
    for (const auto& row : model.program.rows) {
      if (!is_encoding(row.tag)) continue;
      classify(row);
    }
    cache_.resize(m);
    for (int j = 0; j < m; ++j) {
      cache_[j].assign(lines_[j].size(), std::vector<std::optional<std::vector<Bounds>>>(std::size_t{1} << lattice_.per_axis()));
    }
  }

  std::size_t points() const { return lattice_.size(); }

  // Checks one pattern; returns false and fills `why` on a soundness violation.
  bool check(std::uint64_t pattern, bool& feasible, std::string& why) {
    const int m = lattice_.dim();
    feasible = true;
    std::vector<std::vector<const std::vector<Bounds>*>> options(m);
    for (int j = 0; j < m && feasible; ++j) {
      for (std::size_t l = 0; l < lines_[j].size(); ++l) {
        std::uint32_t bits = 0;
        for (std::size_t q = 0; q < lines_[j][l].size(); ++q) {
          if (pattern >> lines_[j][l][q] & 1) bits |= 1u << q;
        }
        const auto& opts = line_options(j, l, bits);
        if (opts.empty()) {
          feasible = false;
          break;
        }
        options[j].push_back(&opts);
      }
    }
    if (!feasible) return true;
    for (int j = 0; j < m; ++j) {
      double lo = kPosInf, hi = kNegInf;
      for (std::size_t t = 0; t < lattice_.size(); ++t) {
        if (pattern >> t & 1) {
          const double c = lattice_.point(t)(j);
          lo = std::min(lo, c);
          hi = std::max(hi, c);
        }
      }
      const Verdict v = scan(j, options[j], lo, hi);
      if (!v.feasible) {
        feasible = false;
        return true;
      }
      if (v.escape_low || v.escape_high) {
        std::ostringstream os;
        os << "pattern " << pattern << " axis " << j << (v.escape_low ? " admits x- above " : " admits x+ below ")
           << (v.escape_low ? lo : hi);
        why = os.str();
      }
    }
    return why.empty();
  }

  // Whether all encoding rows hold at the canonical values of `box`.
  bool canonical_holds(const GridBox& box, std::string& why) const {
    const Vector v = canonical_values(model_, {box});
    std::vector<Matrix> psd;
    for (const auto& pv : model_.program.psd_vars) psd.push_back(Matrix::Zero(pv.dim, pv.dim));
    for (const auto& row : model_.program.rows) {
      if (!is_encoding(row.tag)) continue;
      if (!holds(row_activity(row, v, psd), row.sense, row.rhs)) {
        why = "canonical assignment violates a " + row.tag + " row";
        return false;
      }
    }
    for (int j = 0; j < lattice_.dim(); ++j) {
      const double xm = v(model_.var_index.x_minus[0][j]), xp = v(model_.var_index.x_plus[0][j]);
      if (xm < base_[j].lo_minus - kTol || xp > base_[j].hi_plus + kTol) {
        why = "canonical edges outside the domain";
        return false;
      }
    }
    return true;
  }

 private:
  struct Verdict {
    bool feasible = false;
    bool escape_low = false;
    bool escape_high = false;
  };

  static bool is_encoding(const std::string& tag) {
    return tag == row_tag::kJump || tag == row_tag::kJumpCount || tag == row_tag::kLowerEdge ||
           tag == row_tag::kUpperEdge || tag == row_tag::kWidthJumps || tag == row_tag::kWidthLine ||
           tag == row_tag::kWidthOrder;
  }

  void classify(const LinearConstraint& row) {
    if (!row.psd_terms.empty()) throw std::logic_error("encoding row with matrix terms");
    int axis = -1;
    int line = -1;
    auto set_axis = [&](int j) {
      if (axis != -1 && axis != j) throw std::logic_error("encoding row spans two axes: " + row.tag);
      axis = j;
    };
    for (const auto& [var, coeff] : row.scalar_terms) {
      const auto& vi = info_[var];
      if (vi.role == Role::kOther) throw std::logic_error("encoding row with a foreign variable: " + row.tag);
      if (vi.role != Role::kBtilde) set_axis(vi.axis);
    }
    if (axis == -1) throw std::logic_error("encoding row without an axis: " + row.tag);
    for (const auto& [var, coeff] : row.scalar_terms) {
      const auto& vi = info_[var];
      if (vi.role == Role::kXMinus || vi.role == Role::kXPlus) continue;
      const int l = line_of(axis, vi.point);
      if (line != -1 && line != l) throw std::logic_error("encoding row spans two lines: " + row.tag);
      line = l;
    }
    if (line == -1) {
      Bounds b;
      double a = 0.0, c = 0.0;
      for (const auto& [var, coeff] : row.scalar_terms) (info_[var].role == Role::kXMinus ? a : c) += coeff;
      if (!fold(a, c, row.sense, row.rhs, b)) throw std::logic_error("unexpected edge row shape: " + row.tag);
      base_[axis].meet(b);
      return;
    }
    line_rows_[axis][line].push_back({&row});
  }

  int line_of(int axis, std::size_t point) const {
    auto index = lattice_.index_of(point);
    index[axis] = 0;
    return line_of_start_.at({axis, lattice_.id_of(index)});
  }

  // Distinct edge bounds over all jump assignments of the line that satisfy
  // the line's binary-only rows.
  const std::vector<Bounds>& line_options(int j, std::size_t l, std::uint32_t bits) {
    auto& slot = cache_[j][l][bits];
    if (slot) return *slot;
    const auto& line = lines_[j][l];
    const std::size_t n = line.size();
    std::vector<double> value(model_.program.scalars.size(), 0.0);
    for (std::size_t q = 0; q < n; ++q) value[model_.var_index.btilde[0][line[q]]] = bits >> q & 1;
    std::vector<int> jumps;
    for (std::size_t q = 0; q < n; ++q) {
      jumps.push_back(model_.var_index.delta_minus[0][j][line[q]]);
      jumps.push_back(model_.var_index.delta_plus[0][j][line[q]]);
    }
    std::vector<Bounds> found;
    for (std::uint64_t a = 0; a < (std::uint64_t{1} << jumps.size()); ++a) {
      for (std::size_t q = 0; q < jumps.size(); ++q) value[jumps[q]] = a >> q & 1;
      Bounds b;
      bool ok = true;
      for (const auto& lr : line_rows_[j][l]) {
        double constant = 0.0, cm = 0.0, cp = 0.0;
        for (const auto& [var, coeff] : lr.row->scalar_terms) {
          const Role r = info_[var].role;
          if (r == Role::kXMinus) {
            cm += coeff;
          } else if (r == Role::kXPlus) {
            cp += coeff;
          } else {
            constant += coeff * value[var];
          }
        }
        if (cm == 0.0 && cp == 0.0) {
          ok = holds(constant, lr.row->sense, lr.row->rhs);
        } else if (!fold(cm, cp, lr.row->sense, lr.row->rhs - constant, b)) {
          throw std::logic_error("unexpected edge row shape: " + lr.row->tag);
        }
        if (!ok) break;
      }
      if (ok) found.push_back(b);
    }
    std::sort(found.begin(), found.end());
    found.erase(std::unique(found.begin(), found.end(),
                            [](const Bounds& x, const Bounds& y) { return !(x < y) && !(y < x); }),
                found.end());
    slot = std::move(found);
    return *slot;
  }

  // Scans candidate values of the combined lower bounds on x- and on x+ - x-;
  // for each, every line takes its option with the loosest x+ bound among
  // those not exceeding the candidates.
  Verdict scan(int j, const std::vector<const std::vector<Bounds>*>& lines, double lo, double hi) const {
    const Bounds& base = base_[j];
    std::vector<double> cand_minus{base.lo_minus}, cand_width{base.lo_width};
    for (const auto* opts : lines) {
      for (const auto& b : *opts) {
        if (b.lo_minus >= base.lo_minus) cand_minus.push_back(b.lo_minus);
        if (b.lo_width >= base.lo_width) cand_width.push_back(b.lo_width);
      }
    }
    Verdict v;
    for (const double am : cand_minus) {
      for (const double aw : cand_width) {
        double cap = base.hi_plus;
        for (const auto* opts : lines) {
          double best = kNegInf;
          for (const auto& b : *opts) {
            if (b.lo_minus <= am && b.lo_width <= aw) best = std::max(best, b.hi_plus);
          }
          cap = std::min(cap, best);
        }
        const double width = std::max(aw, 0.0);
        if (am + width > cap + kTol) continue;
        v.feasible = true;
        if (cap - width > lo + kTol) v.escape_low = true;
        if (am + width < hi - kTol) v.escape_high = true;
      }
    }
    return v;
  }

  const AssembledModel& model_;
  const Lattice& lattice_;
  std::vector<VarInfo> info_;
  std::vector<std::vector<std::vector<std::size_t>>> lines_;
  std::vector<std::vector<std::vector<LineRow>>> line_rows_;
  std::map<std::pair<int, std::size_t>, int> line_of_start_;
  std::vector<Bounds> base_;
  std::vector<std::vector<std::vector<std::optional<std::vector<Bounds>>>>> cache_;
};

}  // namespace detail

// Soundness over every pattern and jump assignment, completeness over every
// nonempty lattice-aligned box.
inline Report run(const AssembledModel& model) {
  const int dim = model.lattice.dim(), points = model.lattice.per_axis();
  detail::Checker checker(model);
  Report report;
  const std::uint64_t total = std::uint64_t{1} << checker.points();
  for (std::uint64_t pattern = 0; pattern < total; ++pattern) {
    ++report.patterns;
    bool feasible = false;
    std::string why;
    if (!checker.check(pattern, feasible, why)) {
      ++report.soundness_violations;
      if (report.first_violation.empty()) report.first_violation = why;
    }
    if (feasible) ++report.feasible_patterns;
  }
  std::vector<int> lo(dim, 0), hi(dim, 0);
  auto next = [&](std::vector<int>& v, int floor) {
    for (int j = dim - 1; j >= 0; --j) {
      if (++v[j] < points) return true;
      v[j] = floor;
    }
    return false;
  };
  do {
    hi = lo;
    do {
      bool inside = true;
      for (int j = 0; j < dim; ++j) inside = inside && hi[j] >= lo[j];
      if (!inside) continue;
      ++report.boxes;
      std::string why;
      if (!checker.canonical_holds(GridBox{lo, hi, false}, why)) {
        ++report.completeness_violations;
        if (report.first_violation.empty()) report.first_violation = why;
      }
    } while (next(hi, 0));
  } while (next(lo, 0));
  return report;
}

inline Report run(int dim, int points) { return run(small_model(dim, points)); }

}  // namespace encoding_check
