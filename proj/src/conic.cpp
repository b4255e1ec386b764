#include "safedro/conic.hpp"

#include "cone_ipm.hpp"

#include <Eigen/Eigenvalues>

#include <ostream>
#include <stdexcept>

namespace safedro {

using detail::smat;
using detail::svec;
using detail::svec_size;

int ConicProgram::add_scalar(std::string name, VarKind kind, double lower, double upper) {
  if (kind == VarKind::kNonneg) lower = std::max(lower, 0.0);
  if (kind == VarKind::kBinary) {
    lower = std::max(lower, 0.0);
    upper = std::min(upper, 1.0);
  }
  scalars.push_back({std::move(name), kind, lower, upper});
  return static_cast<int>(scalars.size()) - 1;
}

int ConicProgram::add_psd(std::string name, int dim) {
  if (dim <= 0) throw std::invalid_argument("add_psd: dimension must be positive");
  psd_vars.push_back({std::move(name), dim});
  return static_cast<int>(psd_vars.size()) - 1;
}

int ConicProgram::add_row(LinearConstraint row) {
  rows.push_back(std::move(row));
  return static_cast<int>(rows.size()) - 1;
}

int ConicProgram::add_lmi(LmiConstraint lmi) {
  lmis.push_back(std::move(lmi));
  return static_cast<int>(lmis.size()) - 1;
}

int ConicProgram::num_binaries() const {
  int count = 0;
  for (const auto& v : scalars) count += v.kind == VarKind::kBinary;
  return count;
}

namespace {

bool symmetric(const Matrix& a) {
  return a.rows() == a.cols() &&
         (a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff());
}

double min_eig(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

}  // namespace

void ConicProgram::check() const {
  const int ns = static_cast<int>(scalars.size());
  const int np = static_cast<int>(psd_vars.size());
  auto check_scalar = [&](int v, const std::string& where) {
    if (v < 0 || v >= ns) throw std::invalid_argument(where + ": undeclared scalar variable " + std::to_string(v));
  };
  auto check_psd = [&](const PsdTerm& t, const std::string& where) {
    if (t.var < 0 || t.var >= np) throw std::invalid_argument(where + ": undeclared PSD variable");
    const int d = psd_vars[t.var].dim;
    if (t.coeff.rows() != d || t.coeff.cols() != d) throw std::invalid_argument(where + ": PSD term shape mismatch");
    if (!symmetric(t.coeff)) throw std::invalid_argument(where + ": PSD term not symmetric");
  };
  for (const auto& [v, c] : objective.scalar_terms) check_scalar(v, "objective");
  for (const auto& t : objective.psd_terms) check_psd(t, "objective");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::string where = "row " + std::to_string(r);
    for (const auto& [v, c] : rows[r].scalar_terms) check_scalar(v, where);
    for (const auto& t : rows[r].psd_terms) check_psd(t, where);
  }
  for (std::size_t l = 0; l < lmis.size(); ++l) {
    const std::string where = "lmi " + std::to_string(l);
    const auto& lmi = lmis[l];
    if (!symmetric(lmi.constant)) throw std::invalid_argument(where + ": constant not symmetric");
    for (const auto& [v, f] : lmi.terms) {
      check_scalar(v, where);
      if (scalars[v].kind == VarKind::kBinary) throw std::invalid_argument(where + ": binary variable inside an LMI");
      if (f.rows() != lmi.constant.rows() || !symmetric(f)) {
        throw std::invalid_argument(where + ": coefficient matrix shape mismatch or asymmetric");
      }
    }
  }
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kNumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

double row_activity(const LinearConstraint& row, const Vector& scalars, const std::vector<Matrix>& psd) {
  double v = 0.0;
  for (const auto& [j, a] : row.scalar_terms) v += a * scalars(j);
  for (const auto& t : row.psd_terms) v += t.coeff.cwiseProduct(psd[t.var]).sum();
  return v;
}

namespace {

struct Bounds {
  std::vector<double> lo, hi;
};

Bounds effective_bounds(const ConicProgram& p, const BoundOverrides* overrides) {
  Bounds b;
  for (std::size_t j = 0; j < p.scalars.size(); ++j) {
    const auto& v = p.scalars[j];
    double lo = v.lower, hi = v.upper;
    if (overrides && j < overrides->size()) {
      lo = (*overrides)[j].first;
      hi = (*overrides)[j].second;
      if (v.kind != VarKind::kFree) lo = std::max(lo, 0.0);
      if (v.kind == VarKind::kBinary) hi = std::min(hi, 1.0);
    }
    b.lo.push_back(lo);
    b.hi.push_back(hi);
  }
  return b;
}

bool is_fixed(double lo, double hi) { return std::isfinite(lo) && std::abs(hi - lo) <= 1e-12 * std::max(1.0, std::abs(lo)); }

struct RowMap {
  enum Kind { kNone, kCone, kEq } kind = kNone;
  int index = 0;
};

}  // namespace

SdpSolution solve_sdp(const ConicProgram& p, const SolverOptions& opts, const BoundOverrides* overrides,
                      bool relax_binaries) {
  p.check();
  const Bounds bounds = effective_bounds(p, overrides);
  const int ns = static_cast<int>(p.scalars.size());
  const double sign = p.objective.maximize ? -1.0 : 1.0;

  SdpSolution sol;
  sol.scalar_values = Vector::Zero(ns);
  for (const auto& v : p.psd_vars) sol.psd_values.push_back(Matrix::Zero(v.dim, v.dim));
  sol.row_duals = Vector::Zero(p.rows.size());
  for (const auto& l : p.lmis) sol.lmi_duals.push_back(Matrix::Zero(l.constant.rows(), l.constant.rows()));
  for (const auto& v : p.psd_vars) sol.psd_duals.push_back(Matrix::Zero(v.dim, v.dim));
  sol.lower_bound_duals = Vector::Zero(ns);
  sol.upper_bound_duals = Vector::Zero(ns);

  auto infeasible = [&]() {
    sol.status = SolveStatus::kInfeasible;
    sol.objective = sol.dual_objective = p.objective.maximize ? -kInf : kInf;
    return sol;
  };

  // Column layout: free scalars, then one svec block per PSD variable.
  std::vector<int> col(ns, -1);
  Vector fixed_value = Vector::Zero(ns);
  int n = 0;
  for (int j = 0; j < ns; ++j) {
    if (bounds.lo[j] > bounds.hi[j] + 1e-9) return infeasible();
    if (is_fixed(bounds.lo[j], bounds.hi[j])) {
      fixed_value(j) = bounds.lo[j];
    } else {
      if (p.scalars[j].kind == VarKind::kBinary && !relax_binaries) {
        throw std::invalid_argument("solve_sdp: free binary variable '" + p.scalars[j].name + "'");
      }
      col[j] = n++;
    }
  }
  std::vector<int> psd_col;
  for (const auto& v : p.psd_vars) {
    psd_col.push_back(n);
    n += svec_size(v.dim);
  }

  detail::ConeProblem cp;
  cp.c = Vector::Zero(n);
  double const_min = sign * p.objective.offset;
  for (const auto& [j, a] : p.objective.scalar_terms) {
    if (col[j] >= 0) {
      cp.c(col[j]) += sign * a;
    } else {
      const_min += sign * a * fixed_value(j);
    }
  }
  for (const auto& t : p.objective.psd_terms) {
    cp.c.segment(psd_col[t.var], svec_size(p.psd_vars[t.var].dim)) += sign * svec(t.coeff);
  }

  std::vector<Eigen::Triplet<double>> gt, at;
  std::vector<double> h, b;
  std::vector<RowMap> row_map(p.rows.size());
  int g_rows = 0;
  for (std::size_t r = 0; r < p.rows.size(); ++r) {
    const auto& row = p.rows[r];
    double constant = 0.0;
    std::vector<std::pair<int, double>> terms;
    for (const auto& [j, a] : row.scalar_terms) {
      if (a == 0.0) continue;
      if (col[j] >= 0) {
        terms.emplace_back(col[j], a);
      } else {
        constant += a * fixed_value(j);
      }
    }
    for (const auto& t : row.psd_terms) {
      const Vector sv = svec(t.coeff);
      for (int k = 0; k < sv.size(); ++k) {
        if (sv(k) != 0.0) terms.emplace_back(psd_col[t.var] + k, sv(k));
      }
    }
    const double rhs = row.rhs - constant;
    if (terms.empty()) {
      const double tol = 1e-9 * std::max(1.0, std::abs(row.rhs));
      const bool ok = row.sense == RowSense::kGreaterEqual ? rhs <= tol
                      : row.sense == RowSense::kLessEqual  ? rhs >= -tol
                                                           : std::abs(rhs) <= tol;
      if (!ok) return infeasible();
      continue;
    }
    if (row.sense == RowSense::kEqual) {
      const int i = static_cast<int>(b.size());
      for (const auto& [c, a] : terms) at.emplace_back(i, c, a);
      b.push_back(rhs);
      row_map[r] = {RowMap::kEq, i};
    } else {
      const double s = row.sense == RowSense::kGreaterEqual ? -1.0 : 1.0;
      for (const auto& [c, a] : terms) gt.emplace_back(g_rows, c, s * a);
      h.push_back(s * rhs);
      row_map[r] = {RowMap::kCone, g_rows++};
    }
  }
  std::vector<int> lower_row(ns, -1), upper_row(ns, -1);
  for (int j = 0; j < ns; ++j) {
    if (col[j] < 0) continue;
    if (std::isfinite(bounds.lo[j])) {
      gt.emplace_back(g_rows, col[j], -1.0);
      h.push_back(-bounds.lo[j]);
      lower_row[j] = g_rows++;
    }
    if (std::isfinite(bounds.hi[j])) {
      gt.emplace_back(g_rows, col[j], 1.0);
      h.push_back(bounds.hi[j]);
      upper_row[j] = g_rows++;
    }
  }
  cp.lp_dim = g_rows;

  std::vector<int> lmi_off(p.lmis.size(), -1);
  for (std::size_t l = 0; l < p.lmis.size(); ++l) {
    const auto& lmi = p.lmis[l];
    const int d = static_cast<int>(lmi.constant.rows());
    Matrix constant = lmi.constant;
    std::vector<std::pair<int, Vector>> terms;
    for (const auto& [j, f] : lmi.terms) {
      if (col[j] >= 0) {
        terms.emplace_back(col[j], svec(f));
      } else {
        constant += fixed_value(j) * f;
      }
    }
    if (terms.empty()) {
      if (min_eig(constant) < -1e-9) return infeasible();
      continue;
    }
    lmi_off[l] = g_rows;
    for (const auto& [c, sv] : terms) {
      for (int k = 0; k < sv.size(); ++k) {
        if (sv(k) != 0.0) gt.emplace_back(g_rows + k, c, -sv(k));
      }
    }
    const Vector hv = svec(constant);
    for (int k = 0; k < hv.size(); ++k) h.push_back(hv(k));
    g_rows += svec_size(d);
    cp.psd_dims.push_back(d);
  }
  std::vector<int> psd_off;
  for (std::size_t k = 0; k < p.psd_vars.size(); ++k) {
    const int d = svec_size(p.psd_vars[k].dim);
    psd_off.push_back(g_rows);
    for (int i = 0; i < d; ++i) {
      gt.emplace_back(g_rows + i, psd_col[k] + i, -1.0);
      h.push_back(0.0);
    }
    g_rows += d;
    cp.psd_dims.push_back(p.psd_vars[k].dim);
  }

  cp.G.resize(g_rows, n);
  cp.G.setFromTriplets(gt.begin(), gt.end());
  cp.h = Eigen::Map<Vector>(h.data(), static_cast<Eigen::Index>(h.size()));
  cp.A.resize(static_cast<Eigen::Index>(b.size()), n);
  cp.A.setFromTriplets(at.begin(), at.end());
  cp.b = Eigen::Map<Vector>(b.data(), static_cast<Eigen::Index>(b.size()));

  detail::ConeResult res;
  if (n == 0) {
    res.status = SolveStatus::kOptimal;
    res.x = Vector::Zero(0);
    res.y = Vector::Zero(cp.b.size());
    res.z = Vector::Zero(g_rows);
    res.s = cp.h;
  } else if (g_rows == 0 && cp.b.size() == 0) {
    res.status = cp.c.isZero(0.0) ? SolveStatus::kOptimal : SolveStatus::kUnbounded;
    res.x = Vector::Zero(n);
    res.y = Vector::Zero(0);
    res.z = res.s = Vector::Zero(0);
  } else {
    res = detail::solve_cone(cp, opts);
  }
  sol.status = res.status;
  sol.iterations = res.iterations;
  if (res.status == SolveStatus::kInfeasible) return infeasible();
  if (res.status == SolveStatus::kUnbounded) {
    sol.objective = sol.dual_objective = p.objective.maximize ? kInf : -kInf;
    return sol;
  }

  for (int j = 0; j < ns; ++j) sol.scalar_values(j) = col[j] >= 0 ? res.x(col[j]) : fixed_value(j);
  for (std::size_t k = 0; k < p.psd_vars.size(); ++k) {
    const int d = p.psd_vars[k].dim;
    sol.psd_values[k] = smat(res.x.segment(psd_col[k], svec_size(d)), d);
    sol.psd_duals[k] = smat(res.z.segment(psd_off[k], svec_size(d)), d);
  }
  for (std::size_t r = 0; r < p.rows.size(); ++r) {
    const auto& rm = row_map[r];
    if (rm.kind == RowMap::kEq) sol.row_duals(r) = -res.y(rm.index);
    if (rm.kind == RowMap::kCone) {
      sol.row_duals(r) = p.rows[r].sense == RowSense::kGreaterEqual ? res.z(rm.index) : -res.z(rm.index);
    }
  }
  for (int j = 0; j < ns; ++j) {
    if (lower_row[j] >= 0) sol.lower_bound_duals(j) = res.z(lower_row[j]);
    if (upper_row[j] >= 0) sol.upper_bound_duals(j) = res.z(upper_row[j]);
  }
  for (std::size_t l = 0; l < p.lmis.size(); ++l) {
    if (lmi_off[l] < 0) continue;
    const int d = static_cast<int>(p.lmis[l].constant.rows());
    sol.lmi_duals[l] = smat(res.z.segment(lmi_off[l], svec_size(d)), d);
  }

  double obj = p.objective.offset;
  for (const auto& [j, a] : p.objective.scalar_terms) obj += a * sol.scalar_values(j);
  for (const auto& t : p.objective.psd_terms) obj += t.coeff.cwiseProduct(sol.psd_values[t.var]).sum();
  sol.objective = obj;
  sol.dual_objective = sign * (res.dcost + const_min);
  sol.kkt = kkt_residuals(p, sol, overrides);
  return sol;
}

KktResiduals kkt_residuals(const ConicProgram& p, const SdpSolution& sol, const BoundOverrides* overrides) {
  const Bounds bounds = effective_bounds(p, overrides);
  const int ns = static_cast<int>(p.scalars.size());
  const double sign = p.objective.maximize ? -1.0 : 1.0;
  KktResiduals out;
  const Vector& x = sol.scalar_values;

  auto has_duals = [&]() { return sol.row_duals.size() == static_cast<Eigen::Index>(p.rows.size()); };

  for (int j = 0; j < ns; ++j) {
    out.primal_infeasibility = std::max({out.primal_infeasibility, bounds.lo[j] - x(j), x(j) - bounds.hi[j]});
  }
  for (std::size_t k = 0; k < p.psd_vars.size(); ++k) {
    const double e = min_eig(sol.psd_values[k]);
    out.psd_min_eig.push_back(e);
    out.primal_infeasibility = std::max(out.primal_infeasibility, -e);
  }
  std::vector<double> slack(p.rows.size());
  for (std::size_t r = 0; r < p.rows.size(); ++r) {
    const auto& row = p.rows[r];
    const double a = row_activity(row, x, sol.psd_values);
    double viol = 0.0;
    if (row.sense == RowSense::kGreaterEqual) viol = row.rhs - a;
    if (row.sense == RowSense::kLessEqual) viol = a - row.rhs;
    if (row.sense == RowSense::kEqual) viol = std::abs(a - row.rhs);
    slack[r] = a - row.rhs;
    out.primal_infeasibility = std::max(out.primal_infeasibility, viol);
  }
  std::vector<Matrix> lmi_value;
  for (const auto& lmi : p.lmis) {
    Matrix v = lmi.constant;
    for (const auto& [j, f] : lmi.terms) v += x(j) * f;
    const double e = min_eig(v);
    out.lmi_min_eig.push_back(e);
    out.primal_infeasibility = std::max(out.primal_infeasibility, -e);
    lmi_value.push_back(v);
  }
  if (!has_duals()) return out;

  // Stationarity on non-fixed scalars and PSD variables (minimization form).
  Vector grad = Vector::Zero(ns);
  for (const auto& [j, a] : p.objective.scalar_terms) grad(j) += sign * a;
  std::vector<Matrix> pgrad;
  for (const auto& v : p.psd_vars) pgrad.push_back(Matrix::Zero(v.dim, v.dim));
  for (const auto& t : p.objective.psd_terms) pgrad[t.var] += sign * t.coeff;
  double dual_inf = 0.0;
  for (std::size_t r = 0; r < p.rows.size(); ++r) {
    const double pi = sol.row_duals(r);
    const auto& row = p.rows[r];
    for (const auto& [j, a] : row.scalar_terms) grad(j) -= pi * a;
    for (const auto& t : row.psd_terms) pgrad[t.var] -= pi * t.coeff;
    if (row.sense == RowSense::kGreaterEqual) dual_inf = std::max(dual_inf, -pi);
    if (row.sense == RowSense::kLessEqual) dual_inf = std::max(dual_inf, pi);
    out.complementarity_gap += std::abs(pi * slack[r]);
  }
  for (std::size_t l = 0; l < p.lmis.size(); ++l) {
    for (const auto& [j, f] : p.lmis[l].terms) grad(j) -= sol.lmi_duals[l].cwiseProduct(f).sum();
    dual_inf = std::max(dual_inf, -min_eig(sol.lmi_duals[l]));
    out.complementarity_gap += std::abs(sol.lmi_duals[l].cwiseProduct(lmi_value[l]).sum());
  }
  for (int j = 0; j < ns; ++j) {
    if (is_fixed(bounds.lo[j], bounds.hi[j])) continue;
    const double lo_d = sol.lower_bound_duals(j), hi_d = sol.upper_bound_duals(j);
    dual_inf = std::max({dual_inf, -lo_d, -hi_d, std::abs(grad(j) - lo_d + hi_d)});
    if (std::isfinite(bounds.lo[j])) out.complementarity_gap += std::abs(lo_d * (x(j) - bounds.lo[j]));
    if (std::isfinite(bounds.hi[j])) out.complementarity_gap += std::abs(hi_d * (bounds.hi[j] - x(j)));
  }
  for (std::size_t k = 0; k < p.psd_vars.size(); ++k) {
    dual_inf = std::max(dual_inf, (pgrad[k] - sol.psd_duals[k]).cwiseAbs().maxCoeff());
    dual_inf = std::max(dual_inf, -min_eig(sol.psd_duals[k]));
    out.complementarity_gap += std::abs(sol.psd_duals[k].cwiseProduct(sol.psd_values[k]).sum());
  }
  out.dual_infeasibility = dual_inf;
  return out;
}

void dump_program(const ConicProgram& p, std::ostream& out) {
  auto kind = [](VarKind k) {
    return k == VarKind::kFree ? "free" : k == VarKind::kNonneg ? "nonneg" : "binary";
  };
  auto sense = [](RowSense s) {
    return s == RowSense::kGreaterEqual ? "ge" : s == RowSense::kLessEqual ? "le" : "eq";
  };
  auto matrix_terms = [&out](const char* prefix, const std::string& head, const Matrix& a) {
    for (int i = 0; i < a.rows(); ++i) {
      for (int j = i; j < a.cols(); ++j) {
        if (a(i, j) != 0.0) out << prefix << ' ' << head << i << ' ' << j << ' ' << a(i, j) << '\n';
      }
    }
  };
  out.precision(17);
  for (std::size_t j = 0; j < p.scalars.size(); ++j) {
    const auto& v = p.scalars[j];
    out << "var " << j << ' ' << v.name << ' ' << kind(v.kind) << ' ' << v.lower << ' ' << v.upper << '\n';
  }
  for (std::size_t k = 0; k < p.psd_vars.size(); ++k) {
    out << "psd " << k << ' ' << p.psd_vars[k].name << ' ' << p.psd_vars[k].dim << '\n';
  }
  out << "obj " << (p.objective.maximize ? "max" : "min") << ' ' << p.objective.offset << '\n';
  for (const auto& [j, a] : p.objective.scalar_terms) out << "s " << j << ' ' << a << '\n';
  for (const auto& t : p.objective.psd_terms) matrix_terms("p", std::to_string(t.var) + ' ', t.coeff);
  for (std::size_t r = 0; r < p.rows.size(); ++r) {
    const auto& row = p.rows[r];
    out << "row " << r << ' ' << sense(row.sense) << ' ' << row.rhs << ' ' << (row.tag.empty() ? "-" : row.tag) << '\n';
    for (const auto& [j, a] : row.scalar_terms) out << "s " << j << ' ' << a << '\n';
    for (const auto& t : row.psd_terms) matrix_terms("p", std::to_string(t.var) + ' ', t.coeff);
  }
  for (std::size_t l = 0; l < p.lmis.size(); ++l) {
    const auto& lmi = p.lmis[l];
    out << "lmi " << l << ' ' << lmi.constant.rows() << ' ' << (lmi.tag.empty() ? "-" : lmi.tag) << '\n';
    matrix_terms("c", "", lmi.constant);
    for (const auto& [j, f] : lmi.terms) matrix_terms("f", std::to_string(j) + ' ', f);
  }
}

}  // namespace safedro
