#include "safedro/lipschitz.hpp"

#include "safedro/conic.hpp"

#include <Eigen/Eigenvalues>

namespace safedro {

double sym_min_eig(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("sym_min_eig: matrix is not square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("sym_min_eig: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

namespace {

// max x_i over the height polytope, or +inf if unbounded.
double max_height(const FixedBoxes::HeightPolytope& poly, int k, int i) {
  ConicProgram lp;
  std::vector<int> vars;
  for (int j = 0; j < k; ++j) vars.push_back(lp.add_scalar("x" + std::to_string(j)));
  for (const auto& row : poly.rows) {
    LinearConstraint c;
    for (int j = 0; j < k; ++j) {
      if (row.coeffs(j) != 0.0) c.scalar_terms.push_back({vars[j], row.coeffs(j)});
    }
    c.sense = row.sense;
    c.rhs = row.rhs;
    lp.add_row(std::move(c));
  }
  lp.objective.maximize = true;
  lp.objective.scalar_terms = {{vars[i], 1.0}};
  const auto sol = solve_sdp(lp);
  if (sol.status == SolveStatus::kOptimal) return sol.objective;
  if (sol.status == SolveStatus::kUnbounded) return std::numeric_limits<double>::infinity();
  throw std::runtime_error("height polytope is empty or could not be solved");
}

}  // namespace

double height_bound(const SimpleFunctionSpec& fn) {
  if (fn.is_fixed() && fn.fixed().free_heights) {
    double total = 0.0;
    for (int i = 0; i < fn.k(); ++i) total += std::max(0.0, max_height(*fn.fixed().free_heights, fn.k(), i));
    if (!std::isfinite(total)) throw std::invalid_argument("height polytope is unbounded");
    return total;
  }
  return fn.heights.cwiseMax(0.0).sum();
}

TraceBounds trace_bounds(const AmbiguitySpec& spec, const SimpleFunctionSpec& fn) {
  const int m = spec.dim;
  Matrix block = Matrix::Zero(m + 1, m + 1);
  block.topLeftCorner(m, m) = spec.cov;
  block(m, m) = 1.0;
  TraceBounds out;
  out.lambda_min_block = sym_min_eig(block);
  out.lambda_min_sigma = sym_min_eig(spec.cov);
  if (out.lambda_min_block <= 0 || out.lambda_min_sigma <= 0) {
    throw std::invalid_argument("trace_bounds: Sigma is not positive definite");
  }
  const double heights = height_bound(fn);
  out.tr_y1_max = (heights + std::abs(spec.threshold)) / out.lambda_min_block;
  out.tr_y2_max = heights / (spec.eps_sigma * out.lambda_min_sigma);
  return out;
}

double lipschitz_constant(const AmbiguitySpec& spec, double tr_y1_max, double tr_y2_max) {
  const double mu_min = spec.mean.minCoeff();
  const double mu_max = spec.mean.maxCoeff();
  if (mu_min > spec.domain_edge / 2) {
    throw std::invalid_argument("lipschitz_constant: min_j mu_j exceeds M/2");
  }
  const double reach = std::max(spec.domain_edge - mu_min, mu_max);
  return 2.0 * tr_y1_max + reach * tr_y2_max * 2.0 * std::sqrt(static_cast<double>(spec.dim));
}

double max_safe_step(const AmbiguitySpec& spec, double L) {
  if (spec.threshold >= 1.0) return 0.0;
  if (L <= 0.0) return std::numeric_limits<double>::infinity();
  return (1.0 - spec.threshold) / (L * std::sqrt(static_cast<double>(spec.dim)));
}

LipschitzCertificate lipschitz_certificate(const AmbiguitySpec& spec, const SimpleFunctionSpec& fn) {
  const auto tb = trace_bounds(spec, fn);
  LipschitzCertificate cert;
  cert.tr_y1_max = tb.tr_y1_max;
  cert.tr_y2_max = tb.tr_y2_max;
  cert.lambda_min_block = tb.lambda_min_block;
  cert.lambda_min_sigma = tb.lambda_min_sigma;
  cert.L = lipschitz_constant(spec, tb.tr_y1_max, tb.tr_y2_max);
  cert.no_safe_step = spec.threshold >= 1.0;
  cert.delta_max = max_safe_step(spec, cert.L);
  return cert;
}

}  // namespace safedro
