#include "sparse_ldl.hpp"

#include <Eigen/OrderingMethods>

#include <cmath>

namespace safedro::detail {

namespace {

using Sparse = Eigen::SparseMatrix<double>;

Sparse permuted_upper(const Sparse& lower, const Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>& perm) {
  Sparse upper(lower.rows(), lower.cols());
  upper.selfadjointView<Eigen::Upper>() = lower.selfadjointView<Eigen::Lower>().twistedBy(perm);
  upper.makeCompressed();
  return upper;
}

}  // namespace

void QuasiDefiniteLdl::analyze(const SparseMatrix& lower, std::vector<int> signs, int first_begin, int first_end) {
  n_ = static_cast<int>(lower.rows());
  const Sparse full = lower.selfadjointView<Eigen::Lower>();
  const int lead = first_end - first_begin;
  std::vector<int> rest;
  std::vector<int> rest_pos(n_, -1);
  for (int i = 0; i < n_; ++i) {
    if (i >= first_begin && i < first_end) continue;
    rest_pos[i] = static_cast<int>(rest.size());
    rest.push_back(i);
  }
  const int nr = static_cast<int>(rest.size());
  // Pattern of the Schur complement after the leading block: K_RR + K_RF K_FR.
  std::vector<Eigen::Triplet<double>> rr, rf;
  for (int j = 0; j < n_; ++j) {
    for (Sparse::InnerIterator it(full, j); it; ++it) {
      const int i = static_cast<int>(it.row());
      if (rest_pos[i] < 0) continue;
      if (rest_pos[j] >= 0) {
        rr.emplace_back(rest_pos[i], rest_pos[j], 1.0);
      } else {
        rf.emplace_back(rest_pos[i], j - first_begin, 1.0);
      }
    }
  }
  Sparse schur(nr, nr), coupling(nr, std::max(lead, 0));
  schur.setFromTriplets(rr.begin(), rr.end());
  coupling.setFromTriplets(rf.begin(), rf.end());
  if (lead > 0) schur = schur + Sparse(coupling * coupling.transpose());
  Eigen::AMDOrdering<int> amd;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> p;
  amd(schur, p);
  // AMD returns the inverse permutation; twistedBy wants old-to-new.
  const Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> rest_perm = p.inverse();
  perm_.resize(n_);
  for (int i = first_begin; i < first_end; ++i) perm_.indices()(i) = i - first_begin;
  for (int r = 0; r < nr; ++r) perm_.indices()(rest[r]) = lead + rest_perm.indices()(r);
  signs_perm_.assign(n_, 1);
  for (int i = 0; i < n_; ++i) signs_perm_[perm_.indices()(i)] = signs[i];

  const Sparse upper = permuted_upper(lower, perm_);
  etree_.assign(n_, -1);
  lnz_.assign(n_, 0);
  std::vector<int> work(n_, -1);
  for (int j = 0; j < n_; ++j) {
    work[j] = j;
    for (Sparse::InnerIterator it(upper, j); it; ++it) {
      int i = static_cast<int>(it.row());
      if (i >= j) continue;
      while (work[i] != j) {
        if (etree_[i] == -1) etree_[i] = j;
        ++lnz_[i];
        work[i] = j;
        i = etree_[i];
      }
    }
  }
  lp_.assign(n_ + 1, 0);
  for (int i = 0; i < n_; ++i) lp_[i + 1] = lp_[i] + lnz_[i];
  li_.assign(lp_[n_], 0);
  lx_.assign(lp_[n_], 0.0);
  d_.assign(n_, 0.0);
  dinv_.assign(n_, 0.0);
}

bool QuasiDefiniteLdl::factorize(const SparseMatrix& lower) {
  const Sparse upper = permuted_upper(lower, perm_);
  std::vector<int> next(lp_.begin(), lp_.end() - 1);
  std::vector<double> y(n_, 0.0);
  std::vector<char> marked(n_, 0);
  std::vector<int> pattern, stack;
  pattern.reserve(n_);
  stack.reserve(n_);
  bumps_ = 0;
  for (int k = 0; k < n_; ++k) {
    pattern.clear();
    d_[k] = 0.0;
    for (Sparse::InnerIterator it(upper, k); it; ++it) {
      const int b = static_cast<int>(it.row());
      if (b == k) {
        d_[k] = it.value();
        continue;
      }
      if (b > k) continue;
      y[b] = it.value();
      if (marked[b]) continue;
      marked[b] = 1;
      stack.clear();
      stack.push_back(b);
      for (int e = etree_[b]; e != -1 && e < k && !marked[e]; e = etree_[e]) {
        marked[e] = 1;
        stack.push_back(e);
      }
      while (!stack.empty()) {
        pattern.push_back(stack.back());
        stack.pop_back();
      }
    }
    for (int q = static_cast<int>(pattern.size()) - 1; q >= 0; --q) {
      const int c = pattern[q];
      const double yc = y[c];
      for (int j = lp_[c]; j < next[c]; ++j) y[li_[j]] -= lx_[j] * yc;
      if (next[c] >= lp_[c + 1]) return false;  // pattern outside the analyzed one
      const int slot = next[c]++;
      li_[slot] = k;
      lx_[slot] = yc * dinv_[c];
      d_[k] -= yc * lx_[slot];
      y[c] = 0.0;
      marked[c] = 0;
    }
    if (signs_perm_[k] * d_[k] <= dynamic_eps) {
      d_[k] = signs_perm_[k] * dynamic_delta;
      ++bumps_;
    }
    if (!std::isfinite(d_[k])) return false;
    dinv_[k] = 1.0 / d_[k];
  }
  return true;
}

Eigen::VectorXd QuasiDefiniteLdl::solve(const Eigen::VectorXd& b) const {
  Eigen::VectorXd x = perm_ * b;
  for (int c = 0; c < n_; ++c) {
    const double v = x(c);
    for (int j = lp_[c]; j < lp_[c + 1]; ++j) x(li_[j]) -= lx_[j] * v;
  }
  for (int i = 0; i < n_; ++i) x(i) *= dinv_[i];
  for (int c = n_ - 1; c >= 0; --c) {
    double v = x(c);
    for (int j = lp_[c]; j < lp_[c + 1]; ++j) v -= lx_[j] * x(li_[j]);
    x(c) = v;
  }
  return perm_.transpose() * x;
}

}  // namespace safedro::detail
