#include "cone_ipm.hpp"

#include "sparse_ldl.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <cstdio>
#include <optional>

namespace safedro::detail {

Vector svec(const Matrix& a) {
  const int n = static_cast<int>(a.rows());
  Vector v(svec_size(n));
  int k = 0;
  for (int j = 0; j < n; ++j) {
    v(k++) = a(j, j);
    for (int i = j + 1; i < n; ++i) v(k++) = M_SQRT2 * 0.5 * (a(i, j) + a(j, i));
  }
  return v;
}

Matrix smat(const Eigen::Ref<const Vector>& v, int n) {
  Matrix a(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    a(j, j) = v(k++);
    for (int i = j + 1; i < n; ++i) {
      a(i, j) = a(j, i) = v(k++) / M_SQRT2;
    }
  }
  return a;
}

namespace {

// Iterations without a better merit before the solve is declared stalled.
constexpr int kPatience = 40;
// Below this the embedding has left the optimal face; only a certificate can follow.
constexpr double kCollapsedTau = 1e-10;

// Cone vectors in the scaled frame: LP part plus one full matrix per PSD block.
struct Scaled {
  Vector lp;
  std::vector<Matrix> mats;
};

class Cone {
 public:
  Cone(int lp_dim, std::vector<int> dims) : lp_(lp_dim), dims_(std::move(dims)) {
    offsets_.push_back(lp_);
    for (int n : dims_) offsets_.push_back(offsets_.back() + svec_size(n));
    degree_ = lp_;
    for (int n : dims_) degree_ += n;
  }

  int size() const { return offsets_.back(); }
  int degree() const { return degree_; }

  Vector identity() const {
    Vector e = Vector::Zero(size());
    e.head(lp_).setOnes();
    for (std::size_t b = 0; b < dims_.size(); ++b) {
      e.segment(offsets_[b], svec_size(dims_[b])) = svec(Matrix::Identity(dims_[b], dims_[b]));
    }
    return e;
  }

  // Smallest "eigenvalue" of a cone vector.
  double min_eig(const Vector& u) const {
    double v = lp_ > 0 ? u.head(lp_).minCoeff() : kInf;
    for (std::size_t b = 0; b < dims_.size(); ++b) {
      const Matrix a = block(u, b);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
      v = std::min(v, eig.eigenvalues()(0));
    }
    return v;
  }

  Matrix block(const Vector& u, std::size_t b) const {
    return smat(u.segment(offsets_[b], svec_size(dims_[b])), dims_[b]);
  }

  // NT scaling of (s, z). Returns false if either leaves the interior.
  bool scale(const Vector& s, const Vector& z) {
    w_ = (s.head(lp_).array() / z.head(lp_).array()).sqrt();
    lambda_.lp = (s.head(lp_).array() * z.head(lp_).array()).sqrt();
    if (lp_ > 0 && !((s.head(lp_).array() > 0).all() && (z.head(lp_).array() > 0).all())) return false;
    r_.resize(dims_.size());
    rinv_.resize(dims_.size());
    lam_.resize(dims_.size());
    lambda_.mats.resize(dims_.size());
    for (std::size_t b = 0; b < dims_.size(); ++b) {
      Eigen::LLT<Matrix> l1(block(s, b)), l2(block(z, b));
      if (l1.info() != Eigen::Success || l2.info() != Eigen::Success) return false;
      const Matrix L1 = l1.matrixL();
      const Matrix L2 = l2.matrixL();
      Eigen::JacobiSVD<Matrix> svd(L2.transpose() * L1, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const Vector sv = svd.singularValues();
      if (sv.minCoeff() <= 0) return false;
      const Vector isq = sv.array().rsqrt();
      r_[b] = L1 * svd.matrixV() * isq.asDiagonal();
      rinv_[b] = isq.asDiagonal() * svd.matrixU().transpose() * L2.transpose();
      lam_[b] = sv;
      lambda_.mats[b] = sv.asDiagonal();
    }
    return true;
  }

  const Scaled& lambda() const { return lambda_; }

  // W u (z-space to scaled frame).
  Scaled apply_w(const Vector& u) const {
    Scaled out;
    out.lp = u.head(lp_).cwiseProduct(w_);
    for (std::size_t b = 0; b < dims_.size(); ++b) out.mats.push_back(r_[b].transpose() * block(u, b) * r_[b]);
    return out;
  }

  // W^{-T} u (s-space to scaled frame).
  Scaled apply_winvt(const Vector& u) const {
    Scaled out;
    out.lp = u.head(lp_).cwiseQuotient(w_);
    for (std::size_t b = 0; b < dims_.size(); ++b) {
      out.mats.push_back(rinv_[b] * block(u, b) * rinv_[b].transpose());
    }
    return out;
  }

  // W^T q (scaled frame back to s-space).
  Vector apply_wt(const Scaled& q) const {
    Vector out(size());
    out.head(lp_) = q.lp.cwiseProduct(w_);
    for (std::size_t b = 0; b < dims_.size(); ++b) {
      out.segment(offsets_[b], svec_size(dims_[b])) = svec(r_[b] * q.mats[b] * r_[b].transpose());
    }
    return out;
  }

  // Dense W^T W block of a PSD cone in svec coordinates.
  Matrix wtw_block(std::size_t b) const {
    const int n = dims_[b];
    const int d = svec_size(n);
    const Matrix p = r_[b] * r_[b].transpose();
    Matrix out(d, d);
    Vector e = Vector::Zero(d);
    for (int k = 0; k < d; ++k) {
      e.setZero();
      e(k) = 1.0;
      out.col(k) = svec(p * smat(e, n) * p);
    }
    return 0.5 * (out + out.transpose());
  }

  Vector wtw_lp() const { return w_.cwiseProduct(w_); }

  int lp() const { return lp_; }
  const std::vector<int>& dims() const { return dims_; }
  int offset(std::size_t b) const { return offsets_[b]; }

  // Jordan product and its inverse in the scaled frame.
  static Scaled circ(const Scaled& a, const Scaled& b) {
    Scaled out;
    out.lp = a.lp.cwiseProduct(b.lp);
    for (std::size_t k = 0; k < a.mats.size(); ++k) {
      out.mats.push_back(0.5 * (a.mats[k] * b.mats[k] + b.mats[k] * a.mats[k]));
    }
    return out;
  }

  // Solves lambda o x = r.
  Scaled lambda_solve(const Scaled& r) const {
    Scaled out;
    out.lp = r.lp.cwiseQuotient(lambda_.lp);
    for (std::size_t b = 0; b < dims_.size(); ++b) {
      const Vector& l = lam_[b];
      Matrix x(l.size(), l.size());
      for (int i = 0; i < l.size(); ++i) {
        for (int j = 0; j < l.size(); ++j) x(i, j) = 2.0 * r.mats[b](i, j) / (l(i) + l(j));
      }
      out.mats.push_back(x);
    }
    return out;
  }

  // Largest step alpha with lambda + alpha * d in the cone (kInf if unbounded).
  double max_step(const Scaled& d) const {
    double alpha = kInf;
    for (int i = 0; i < lp_; ++i) {
      if (d.lp(i) < 0) alpha = std::min(alpha, -lambda_.lp(i) / d.lp(i));
    }
    for (std::size_t b = 0; b < dims_.size(); ++b) {
      const Vector isq = lam_[b].array().rsqrt();
      const Matrix m = isq.asDiagonal() * d.mats[b] * isq.asDiagonal();
      Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
      const double lo = eig.eigenvalues()(0);
      if (lo < 0) alpha = std::min(alpha, -1.0 / lo);
    }
    return alpha;
  }

 private:
  int lp_;
  std::vector<int> dims_;
  std::vector<int> offsets_;
  int degree_ = 0;
  Vector w_;
  std::vector<Matrix> r_, rinv_;
  std::vector<Vector> lam_;
  Scaled lambda_;
};

Scaled lin(const Scaled& a, double alpha, const Scaled& b) {
  Scaled out;
  out.lp = a.lp + alpha * b.lp;
  for (std::size_t k = 0; k < a.mats.size(); ++k) out.mats.push_back(a.mats[k] + alpha * b.mats[k]);
  return out;
}

Scaled shifted_identity(const Cone& cone, double value) {
  Scaled out;
  out.lp = Vector::Constant(cone.lp(), value);
  for (int n : cone.dims()) out.mats.push_back(value * Matrix::Identity(n, n));
  return out;
}

// Quasi-definite KKT system [[0, A', G'], [A, 0, 0], [G, 0, -W'W]] with static
// regularization and iterative refinement.
// KKT system
//   [ 0  A'  G'      ] [x]   [r1]
//   [ A  0   0       ] [y] = [r2]
//   [ G  0  -W'W     ] [z]   [r3]
// factored with static regularization and refined against the exact matrix.
class Kkt {
 public:
  Kkt(const ConeProblem& prob, const Cone& cone) : prob_(prob), cone_(cone) {
    n_ = static_cast<int>(prob.c.size());
    p_ = static_cast<int>(prob.b.size());
    m_ = cone.size();
  }

  bool factor(bool identity_scaling) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(n_ + p_ + prob_.A.nonZeros() + prob_.G.nonZeros() + m_ * 4);
    for (int i = 0; i < n_; ++i) trip.emplace_back(i, i, kReg);
    for (int k = 0; k < prob_.A.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(prob_.A, k); it; ++it) trip.emplace_back(n_ + it.row(), it.col(), it.value());
    }
    for (int i = 0; i < p_; ++i) trip.emplace_back(n_ + i, n_ + i, -kReg);
    const int zoff = n_ + p_;
    for (int k = 0; k < prob_.G.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(prob_.G, k); it; ++it) trip.emplace_back(zoff + it.row(), it.col(), it.value());
    }
    lp_h_ = identity_scaling ? Vector::Ones(cone_.lp()) : cone_.wtw_lp();
    for (int i = 0; i < cone_.lp(); ++i) trip.emplace_back(zoff + i, zoff + i, -lp_h_(i) - kReg);
    blocks_.clear();
    for (std::size_t b = 0; b < cone_.dims().size(); ++b) {
      const int d = svec_size(cone_.dims()[b]);
      blocks_.push_back(identity_scaling ? Matrix(Matrix::Identity(d, d)) : cone_.wtw_block(b));
      const int off = zoff + cone_.offset(b);
      for (int j = 0; j < d; ++j) {
        for (int i = j; i < d; ++i) trip.emplace_back(off + i, off + j, -blocks_.back()(i, j) - (i == j ? kReg : 0.0));
      }
    }
    const int size = n_ + p_ + m_;
    SparseMatrix k(size, size);
    k.setFromTriplets(trip.begin(), trip.end());
    dense_.reset();
    if (!analyzed_) {
      std::vector<int> signs(size, -1);
      std::fill(signs.begin(), signs.begin() + n_, 1);
      ldl_.analyze(k, std::move(signs));
      analyzed_ = true;
    }
    return ldl_.factorize(k);
  }

  // Returns (x, y, z) stacked.
  Vector solve(const Vector& rhs) const {
    const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
    Vector d = refine(rhs, ldl_.solve(rhs), [&](const Vector& r) { return ldl_.solve(r); });
    if (last_residual_ > kFallbackResidual * scale && n_ + p_ + m_ <= kDenseLimit) {
      if (!dense_) dense_.emplace(dense_matrix());
      d = refine(rhs, dense_->solve(rhs), [&](const Vector& r) { return dense_->solve(r); });
    }
    last_residual_ /= scale;
    return d;
  }

  // Relative residual of the last solve.
  double last_residual() const { return last_residual_; }
  int n() const { return n_; }
  int p() const { return p_; }
  int m() const { return m_; }

 private:
  template <typename Solver>
  Vector refine(const Vector& rhs, Vector d, Solver&& inner) const {
    const double target = 1e-14 * (1.0 + rhs.lpNorm<Eigen::Infinity>());
    Vector r = rhs - multiply(d);
    double norm = r.lpNorm<Eigen::Infinity>();
    for (int it = 0; it < kRefineSteps && norm > target; ++it) {
      const Vector next = d + inner(r);
      const Vector next_r = rhs - multiply(next);
      const double next_norm = next_r.lpNorm<Eigen::Infinity>();
      if (!(next_norm < norm)) break;
      const bool slow = next_norm > 0.5 * norm;
      d = next;
      r = next_r;
      norm = next_norm;
      if (slow) break;
    }
    last_residual_ = norm;
    return d;
  }

  Eigen::PartialPivLU<Matrix> dense_matrix() const {
    const int size = n_ + p_ + m_;
    Matrix k(size, size);
    Vector e = Vector::Zero(size);
    for (int j = 0; j < size; ++j) {
      e(j) = 1.0;
      k.col(j) = multiply(e);
      e(j) = 0.0;
    }
    return Eigen::PartialPivLU<Matrix>(k);
  }

  Vector multiply(const Vector& d) const {
    const auto x = d.head(n_);
    const auto y = d.segment(n_, p_);
    const auto z = d.tail(m_);
    Vector out(n_ + p_ + m_);
    out.head(n_) = prob_.A.transpose() * y + prob_.G.transpose() * z;
    out.segment(n_, p_) = prob_.A * x;
    Vector hz(m_);
    hz.head(cone_.lp()) = lp_h_.cwiseProduct(z.head(cone_.lp()));
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const int d2 = static_cast<int>(blocks_[b].rows());
      hz.segment(cone_.offset(b), d2) = blocks_[b] * z.segment(cone_.offset(b), d2);
    }
    out.tail(m_) = prob_.G * x - hz;
    return out;
  }

  static constexpr double kReg = 1e-9;
  static constexpr int kRefineSteps = 20;
  static constexpr double kFallbackResidual = 1e-3;
  static constexpr int kDenseLimit = 1000;
  const ConeProblem& prob_;
  const Cone& cone_;
  int n_, p_, m_;
  Vector lp_h_;
  std::vector<Matrix> blocks_;
  bool analyzed_ = false;
  QuasiDefiniteLdl ldl_;
  mutable double last_residual_ = 0.0;
  mutable std::optional<Eigen::PartialPivLU<Matrix>> dense_;
};

double safe_norm(const Vector& v) { return v.size() ? v.norm() : 0.0; }
double dot(const Vector& a, const Vector& b) { return a.size() ? a.dot(b) : 0.0; }

}  // namespace

ConeResult solve_cone(const ConeProblem& prob, const SolverOptions& opts) {
  Cone cone(prob.lp_dim, prob.psd_dims);
  Kkt kkt(prob, cone);
  const int n = kkt.n(), p = kkt.p(), m = kkt.m();
  ConeResult res;
  auto split = [&](const Vector& d, Vector& x, Vector& y, Vector& z) {
    x = d.head(n);
    y = d.segment(n, p);
    z = d.tail(m);
  };
  auto stack = [&](const Vector& a, const Vector& b, const Vector& c) {
    Vector out(n + p + m);
    out << a, b, c;
    return out;
  };

  if (!kkt.factor(true)) return res;
  Vector x, y, z, s, tmp;
  split(kkt.solve(stack(Vector::Zero(n), prob.b, prob.h)), x, tmp, s);
  s = -s;
  split(kkt.solve(stack(-prob.c, Vector::Zero(p), Vector::Zero(m))), tmp, y, z);
  const Vector e = cone.identity();
  if (m > 0) {
    const double ts = -cone.min_eig(s);
    if (ts >= -1e-8 * std::max(safe_norm(s), 1.0)) s += (1.0 + ts) * e;
    const double tz = -cone.min_eig(z);
    if (tz >= -1e-8 * std::max(safe_norm(z), 1.0)) z += (1.0 + tz) * e;
  }
  double tau = 1.0, kappa = 1.0;

  const double resx0 = std::max(1.0, safe_norm(prob.c));
  const double resy0 = std::max(1.0, safe_norm(prob.b));
  const double resz0 = std::max(1.0, safe_norm(prob.h));
  const double nu = cone.degree();

  struct Measures {
    double pres, dres, gap, relgap, pcost, dcost, pinf, dinf;
  };
  Measures best{kInf, kInf, kInf, kInf, 0, 0, kInf, kInf};
  Vector bx, by, bz, bs;
  double btau = 1.0;
  int since_best = 0;
  double best_pinf = kInf, best_dinf = kInf;
  Vector py, pz, dx, ds;

  auto finish = [&](SolveStatus status, const Vector& xx, const Vector& yy, const Vector& zz, const Vector& ss,
                    double t, int iters) {
    res.status = status;
    res.iterations = iters;
    if (status == SolveStatus::kOptimal) {
      res.x = xx / t;
      res.y = yy / t;
      res.z = zz / t;
      res.s = ss / t;
      res.pcost = dot(prob.c, res.x);
      res.dcost = -dot(prob.b, res.y) - dot(prob.h, res.z);
    } else if (status == SolveStatus::kInfeasible) {
      const double scale = -(dot(prob.h, zz) + dot(prob.b, yy));
      res.y = yy / scale;
      res.z = zz / scale;
      res.x = Vector::Zero(n);
      res.s = Vector::Zero(m);
    } else if (status == SolveStatus::kUnbounded) {
      const double scale = -dot(prob.c, xx);
      res.x = xx / scale;
      res.s = ss / scale;
      res.y = Vector::Zero(p);
      res.z = Vector::Zero(m);
    } else {
      res.x = xx / t;
      res.y = yy / t;
      res.z = zz / t;
      res.s = ss / t;
      res.pcost = dot(prob.c, res.x);
      res.dcost = -dot(prob.b, res.y) - dot(prob.h, res.z);
    }
    return res;
  };

  for (int iter = 0; iter <= opts.max_iterations; ++iter) {
    const Vector hresx = -(prob.A.transpose() * y + prob.G.transpose() * z);
    const Vector hresy = prob.A * x;
    const Vector hresz = prob.G * x + s;
    const Vector rx = -hresx + prob.c * tau;
    const Vector ry = prob.b * tau - hresy;
    const Vector rz = hresz - prob.h * tau;
    const double cx = dot(prob.c, x), by_ = dot(prob.b, y), hz = dot(prob.h, z);
    const double rt = kappa + cx + by_ + hz;
    const double sz = dot(s, z);
    const double mu = (sz + tau * kappa) / (nu + 1.0);

    Measures cur;
    cur.pcost = cx / tau;
    cur.dcost = -(by_ + hz) / tau;
    cur.pres = std::max(safe_norm(ry) / resy0, safe_norm(rz) / resz0) / tau;
    cur.dres = safe_norm(rx) / resx0 / tau;
    cur.gap = sz / (tau * tau);
    cur.relgap = kInf;
    if (cur.pcost < 0) cur.relgap = cur.gap / -cur.pcost;
    if (cur.dcost > 0) cur.relgap = cur.gap / cur.dcost;
    cur.pinf = (hz + by_ < 0) ? safe_norm(hresx) / resx0 / (-(hz + by_)) : kInf;
    cur.dinf = (cx < 0) ? std::max(safe_norm(hresy) / resy0, safe_norm(hresz) / resz0) / (-cx) : kInf;

    if (opts.verbose) {
      std::fprintf(stderr, "it=%d pcost=%.9e dcost=%.9e gap=%.2e pres=%.2e dres=%.2e tau=%.2e kappa=%.2e pinf=%.2e\n", iter,
                   cur.pcost, cur.dcost, cur.gap, cur.pres, cur.dres, tau, kappa, cur.pinf);
    }

    if (cur.pres <= opts.feastol && cur.dres <= opts.feastol &&
        (cur.gap <= opts.abstol || cur.relgap <= opts.reltol)) {
      return finish(SolveStatus::kOptimal, x, y, z, s, tau, iter);
    }
    if (cur.pinf <= opts.feastol) return finish(SolveStatus::kInfeasible, x, y, z, s, tau, iter);
    if (cur.dinf <= opts.feastol) return finish(SolveStatus::kUnbounded, x, y, z, s, tau, iter);

    const double merit = std::max({cur.pres, cur.dres, std::min(cur.gap, cur.relgap)});
    const double best_merit = std::max({best.pres, best.dres, std::min(best.gap, best.relgap)});
    if (merit < best_merit) {
      best = cur;
      bx = x;
      by = y;
      bz = z;
      bs = s;
      btau = tau;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (cur.pinf < best_pinf) {
      best_pinf = cur.pinf;
      py = y;
      pz = z;
    }
    if (cur.dinf < best_dinf) {
      best_dinf = cur.dinf;
      dx = x;
      ds = s;
    }

    auto stalled = [&]() {
      const double f = opts.stall_factor;
      if (best.pres <= f * opts.feastol && best.dres <= f * opts.feastol &&
          (best.gap <= f * opts.abstol || best.relgap <= f * opts.reltol)) {
        return finish(SolveStatus::kOptimal, bx, by, bz, bs, btau, iter);
      }
      if (best_pinf <= f * opts.feastol) return finish(SolveStatus::kInfeasible, x, py, pz, s, tau, iter);
      if (best_dinf <= f * opts.feastol) return finish(SolveStatus::kUnbounded, dx, y, z, ds, tau, iter);
      return finish(SolveStatus::kNumericalFailure, x, y, z, s, tau, iter);
    };

    if (iter == opts.max_iterations || since_best > kPatience || tau < kCollapsedTau) return stalled();
    if (!cone.scale(s, z)) {
      if (opts.verbose) std::fprintf(stderr, "scaling failed\n");
      return stalled();
    }
    if (!kkt.factor(false)) {
      if (opts.verbose) std::fprintf(stderr, "factorization failed\n");
      return stalled();
    }

    Vector x1, y1, z1;
    split(kkt.solve(stack(-prob.c, prob.b, prob.h)), x1, y1, z1);
    const double denom_base = -kappa / tau + dot(prob.c, x1) + dot(prob.b, y1) + dot(prob.h, z1);

    struct Dir {
      Vector dx, dy, dz, ds;
      Scaled dsbar, dzbar;
      double dtau, dkappa;
    };
    auto direction = [&](double eta, const Scaled& rhs_c, double rk) {
      Dir d;
      const Scaled q = cone.lambda_solve(rhs_c);
      const Vector wtq = cone.apply_wt(q);
      Vector x0, y0, z0;
      split(kkt.solve(stack(-eta * rx, eta * ry, -eta * rz - wtq)), x0, y0, z0);
      d.dtau = (-eta * rt - rk / tau - dot(prob.c, x0) - dot(prob.b, y0) - dot(prob.h, z0)) / denom_base;
      d.dx = x0 + d.dtau * x1;
      d.dy = y0 + d.dtau * y1;
      d.dz = z0 + d.dtau * z1;
      d.dzbar = cone.apply_w(d.dz);
      d.dsbar = lin(q, -1.0, d.dzbar);
      d.ds = cone.apply_wt(d.dsbar);
      d.dkappa = (rk - kappa * d.dtau) / tau;
      return d;
    };
    auto step_limit = [&](const Dir& d) {
      double a = std::min(cone.max_step(d.dsbar), cone.max_step(d.dzbar));
      if (d.dtau < 0) a = std::min(a, -tau / d.dtau);
      if (d.dkappa < 0) a = std::min(a, -kappa / d.dkappa);
      return a;
    };

    const Scaled& lam = cone.lambda();
    const Scaled lam_sq = Cone::circ(lam, lam);
    Scaled neg_lam_sq = lin(shifted_identity(cone, 0.0), -1.0, lam_sq);
    const Dir aff = direction(1.0, neg_lam_sq, -tau * kappa);
    const double alpha_aff = std::min(1.0, step_limit(aff));
    const double sigma = std::pow(1.0 - alpha_aff, 3);

    Scaled rhs_c = lin(shifted_identity(cone, sigma * mu), -1.0, lam_sq);
    rhs_c = lin(rhs_c, -1.0, Cone::circ(aff.dsbar, aff.dzbar));
    const double rk = -tau * kappa + sigma * mu - aff.dtau * aff.dkappa;
    const Dir d = direction(1.0 - sigma, rhs_c, rk);
    if (opts.verbose) std::fprintf(stderr, "  kkt_residual=%.2e\n", kkt.last_residual());
    const double alpha = std::min(1.0, 0.99 * step_limit(d));
    if (!(alpha > 1e-12)) {
      if (opts.verbose) std::fprintf(stderr, "step too short\n");
      return stalled();
    }

    x += alpha * d.dx;
    y += alpha * d.dy;
    z += alpha * d.dz;
    s += alpha * d.ds;
    tau += alpha * d.dtau;
    kappa += alpha * d.dkappa;
    if (!(tau > 0) || !(kappa > 0) || !x.allFinite() || !z.allFinite()) return stalled();
  }
  return res;
}

}  // namespace safedro::detail
