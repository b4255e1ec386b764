#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <vector>

namespace safedro::detail {

/// Up-looking sparse LDL' for quasi-definite matrices. Pivots whose sign
/// disagrees with the expected one (or that are tiny) are replaced by
/// +/- `dynamic_delta`.
class QuasiDefiniteLdl {
 public:
  using SparseMatrix = Eigen::SparseMatrix<double>;

  /// `lower` holds the lower triangle; `signs` the expected pivot signs.
  /// Indices in [first_begin, first_end) must form a diagonal block; they are
  /// eliminated first and the rest is ordered by AMD on its Schur complement.
  void analyze(const SparseMatrix& lower, std::vector<int> signs, int first_begin = 0, int first_end = 0);
  /// Nonzeros of the factor L.
  int factor_nonzeros() const { return lp_.empty() ? 0 : lp_.back(); }
  /// Same pattern as passed to analyze().
  bool factorize(const SparseMatrix& lower);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

  int dynamic_bumps() const { return bumps_; }
  double dynamic_eps = 1e-13;
  double dynamic_delta = 2e-7;

 private:
  int n_ = 0;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm_;
  std::vector<int> signs_perm_;
  std::vector<int> etree_, lnz_, lp_;
  std::vector<int> li_;
  std::vector<double> lx_, d_, dinv_;
  int bumps_ = 0;
};

}  // namespace safedro::detail
