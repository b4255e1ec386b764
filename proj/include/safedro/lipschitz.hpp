#pragma once

#include "safedro/model.hpp"

#include <limits>

namespace safedro {

struct LipschitzCertificate {
  double tr_y1_max = 0.0;
  double tr_y2_max = 0.0;
  double L = 0.0;
  double delta_max = 0.0;
  double lambda_min_block = 0.0;
  double lambda_min_sigma = 0.0;
  /// Set when b >= 1: no step is guaranteed feasible and delta_max is 0.
  bool no_safe_step = false;
};

/// Smallest eigenvalue of a symmetric matrix.
double sym_min_eig(const Matrix& a);

/// Upper bound on the simple-function value at the mean: the sum of positive
/// heights, or the per-height LP maximum over the height polytope.
double height_bound(const SimpleFunctionSpec& fn);

struct TraceBounds {
  double tr_y1_max = 0.0;
  double tr_y2_max = 0.0;
  double lambda_min_block = 0.0;
  double lambda_min_sigma = 0.0;
};

/// Bounds on Tr(Y1) and Tr(Y2) over feasible dual solutions. The moment block
/// at the mean is taken as block-diag(Sigma, 1).
TraceBounds trace_bounds(const AmbiguitySpec& spec, const SimpleFunctionSpec& fn);

/// L = 2 Tr(Y1) + R Tr(Y2) 2 sqrt(m) with R = max(M - mu_min, mu_max).
double lipschitz_constant(const AmbiguitySpec& spec, double tr_y1_max, double tr_y2_max);

/// (1 - b) / (L sqrt(m)); +inf when L = 0, 0 when b >= 1.
double max_safe_step(const AmbiguitySpec& spec, double L);

LipschitzCertificate lipschitz_certificate(const AmbiguitySpec& spec, const SimpleFunctionSpec& fn);

}  // namespace safedro
