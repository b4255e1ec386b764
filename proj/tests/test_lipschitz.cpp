#include "instances.hpp"

#include "safedro/assemble.hpp"
#include "safedro/lipschitz.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace safedro;
using namespace instances;

namespace {

const double kLambda = (3.0 - std::sqrt(2.0)) / 2.0;

Matrix random_psd_with_trace(std::mt19937_64& rng, int n, double trace) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  }
  const Matrix p = a * a.transpose();
  return p * (trace / p.trace());
}

}  // namespace

TEST(SymMinEig, Examples) {
  EXPECT_NEAR(sym_min_eig(Matrix::Identity(3, 3)), 1.0, 1e-15);
  const auto spec = bin_creating();
  EXPECT_NEAR(sym_min_eig(spec.cov), kLambda, 1e-10);
  Matrix block = Matrix::Zero(3, 3);
  block.topLeftCorner(2, 2) = spec.cov;
  block(2, 2) = 1.0;
  EXPECT_NEAR(sym_min_eig(block), kLambda, 1e-10);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.3;
  EXPECT_THROW(sym_min_eig(asym), std::invalid_argument);
}

TEST(TraceBounds, BinCreating) {
  const auto tb = trace_bounds(bin_creating(), single_variable_box());
  EXPECT_NEAR(tb.lambda_min_block, kLambda, 1e-10);
  EXPECT_NEAR(tb.tr_y1_max, 1.1 / kLambda, 1e-10);
  EXPECT_NEAR(tb.tr_y2_max, 1.0 / kLambda, 1e-10);
  EXPECT_NEAR(tb.tr_y1_max, 1.387324, 1e-6);
  EXPECT_NEAR(tb.tr_y2_max, 1.261204, 1e-6);
}

TEST(TraceBounds, IdentityCase) {
  AmbiguitySpec spec = bin_creating();
  spec.cov = Matrix::Identity(2, 2);
  spec.eps_mu = 1.0;
  spec.threshold = 0.0;
  const auto tb = trace_bounds(spec, single_variable_box());
  EXPECT_NEAR(tb.tr_y1_max, 1.0, 1e-12);
  EXPECT_NEAR(tb.tr_y2_max, 1.0, 1e-12);
}

TEST(TraceBounds, IndefiniteSigmaRejected) {
  auto spec = bin_creating();
  spec.cov << 1, 2, 2, 1;
  EXPECT_THROW(trace_bounds(spec, single_variable_box()), std::invalid_argument);
}

TEST(TraceBounds, HeightPolytopeBound) {
  SimpleFunctionSpec fn;
  fn.heights = Vector::Constant(2, 0.5);
  FixedBoxes fixed{{box2(0, 1, 0, 1), box2(0, 0.5, 0, 1)}, FixedBoxes::HeightPolytope{}};
  fixed.free_heights->objective = vec({0, 1});
  fixed.free_heights->rows = {{vec({1, 1}), RowSense::kEqual, 1.0},
                              {vec({1, 0}), RowSense::kGreaterEqual, 0.0},
                              {vec({0, 1}), RowSense::kGreaterEqual, 0.0}};
  fn.mode = fixed;
  // Each height reaches 1 on the simplex.
  EXPECT_NEAR(height_bound(fn), 2.0, 1e-6);
}

TEST(LipschitzConstant, Examples) {
  const auto spec = bin_creating();
  EXPECT_EQ(lipschitz_constant(spec, 0, 0), 0.0);
  const double tr1 = 1.1 / kLambda, tr2 = 1.0 / kLambda;
  EXPECT_NEAR(lipschitz_constant(spec, tr1, tr2), 2 * tr1 + tr2 * 2 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(lipschitz_constant(spec, tr1, tr2), 6.341872, 1e-6);
  EXPECT_NEAR(lipschitz_constant(spec, 1.4, 1.3), 6.477, 1e-3);
  auto far = spec;
  far.mean = vec({0.6, 0.7});
  EXPECT_THROW(lipschitz_constant(far, tr1, tr2), std::invalid_argument);
}

TEST(MaxSafeStep, Examples) {
  const auto spec = bin_creating();
  const auto cert = lipschitz_certificate(spec, single_variable_box());
  EXPECT_NEAR(cert.delta_max, 0.9 / (cert.L * std::sqrt(2.0)), 1e-15);
  EXPECT_NEAR(cert.delta_max, 0.100348, 1e-6);
  EXPECT_GT(cert.delta_max, 0.1);
  EXPECT_EQ(max_safe_step(spec, 0.0), std::numeric_limits<double>::infinity());
  EXPECT_NEAR(max_safe_step(spec, 6.477), 0.0983, 1e-4);
  auto high = spec;
  high.threshold = 1.0;
  EXPECT_EQ(max_safe_step(high, 6.0), 0.0);
  EXPECT_TRUE(lipschitz_certificate(high, single_variable_box()).no_safe_step);
}

TEST(Properties, EmpiricalLipschitzBound) {
  const auto spec = bin_creating();
  const auto cert = lipschitz_certificate(spec, single_variable_box());
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = -1.0;
  for (int pair = 0; pair < 10000; ++pair) {
    const Matrix y1 = random_psd_with_trace(rng, 3, cert.tr_y1_max);
    const Matrix y2 = random_psd_with_trace(rng, 2, cert.tr_y2_max);
    const Vector t = vec({u(rng), u(rng)}), s = vec({u(rng), u(rng)});
    const double lhs = std::abs(poly_part(t, y1, y2, spec) - poly_part(s, y1, y2, spec));
    const double rhs = cert.L * (t - s).norm() + 1e-9;
    worst = std::max(worst, lhs - rhs);
  }
  EXPECT_LE(worst, 0.0);
}

TEST(Properties, TraceBoundMonotonicity) {
  auto spec = bin_creating();
  const auto base = trace_bounds(spec, single_variable_box());
  spec.threshold = 0.3;
  EXPECT_GT(trace_bounds(spec, single_variable_box()).tr_y1_max, base.tr_y1_max);
  spec = bin_creating();
  spec.eps_sigma = 2.0;
  EXPECT_LT(trace_bounds(spec, single_variable_box()).tr_y2_max, base.tr_y2_max);
}

TEST(Properties, FallbackFeasibleAtMaxSafeStep) {
  const auto spec = bin_creating();
  const auto cert = lipschitz_certificate(spec, single_variable_box());
  // The sampled rows only see the step through the margin.
  auto opts = AssemblyOptions::from(cert);
  opts.margin_override = cert.L * cert.delta_max * std::sqrt(2.0);
  const auto model = assemble_case2(spec, single_variable_box(), Lattice(1.0, 2, 0.1), cert.L, opts);
  Vector v = canonical_values(model, {GridBox{{0, 0}, {10, 10}, false}});
  v(model.var_index.y[1]) = spec.threshold;
  const std::vector<Matrix> psd{Matrix::Zero(3, 3), Matrix::Zero(2, 2)};
  double worst = kInf;
  for (const int r : model.sampled_rows) {
    const auto& row = model.program.rows[r];
    worst = std::min(worst, row_activity(row, v, psd) - row.rhs);
  }
  EXPECT_GE(worst, -1e-9);
  EXPECT_LE(worst, 1e-9);
}
