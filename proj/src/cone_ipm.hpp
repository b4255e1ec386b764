#pragma once

#include "safedro/conic.hpp"

#include <Eigen/SparseCore>

namespace safedro::detail {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// min c'x  s.t.  Gx + s = h, Ax = b, s in R+^lp_dim x S^{n_1} x ... (svec).
struct ConeProblem {
  Vector c;
  SparseMatrix G;
  Vector h;
  SparseMatrix A;
  Vector b;
  int lp_dim = 0;
  std::vector<int> psd_dims;
};

struct ConeResult {
  SolveStatus status = SolveStatus::kNumericalFailure;
  Vector x, y, z, s;
  double pcost = 0.0;
  double dcost = 0.0;
  int iterations = 0;
};

ConeResult solve_cone(const ConeProblem& prob, const SolverOptions& opts);

inline int svec_size(int n) { return n * (n + 1) / 2; }

/// Lower triangle column by column, off-diagonals scaled by sqrt(2).
Vector svec(const Matrix& a);
Matrix smat(const Eigen::Ref<const Vector>& v, int n);

}  // namespace safedro::detail
