#include "instances.hpp"

#include "safedro/model.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace safedro;
using namespace instances;

namespace {

bool has_failure(const ValidationReport& r, const std::string& text) {
  for (const auto& f : r.failures()) {
    if (f.find(text) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST(ValidateSpec, BinCreatingPasses) {
  const auto r = validate_spec(bin_creating(), single_variable_box(), Lattice(1.0, 2, 0.1));
  EXPECT_TRUE(r.passed());
}

TEST(ValidateSpec, IndefiniteSigma) {
  auto spec = bin_creating();
  spec.cov << 1, 2, 2, 1;
  const auto r = validate_spec(spec, single_variable_box(), Lattice(1.0, 2, 0.1));
  EXPECT_FALSE(r.passed());
  EXPECT_TRUE(has_failure(r, "Sigma not positive definite"));
}

TEST(ValidateSpec, MeanOutsidePositiveSet) {
  auto spec = bin_creating();
  spec.confidence_sets.push_back({box2(0.5, 1, 0.5, 1), 0.3});
  const auto r = validate_spec(spec, single_variable_box(), Lattice(1.0, 2, 0.1));
  EXPECT_TRUE(has_failure(r, "mean outside positive-mass confidence set"));
}

TEST(ValidateSpec, EpsSigmaBelowOne) {
  auto spec = bin_creating();
  spec.eps_sigma = 0.5;
  EXPECT_TRUE(has_failure(validate_spec(spec, single_variable_box(), Lattice(1.0, 2, 0.1)), "eps_sigma"));
}

TEST(ValidateSpec, MisalignedFixedBox) {
  const auto r = validate_spec(bin_creating(), fixed_box(box2(0, 0.55, 0, 1)), Lattice(1.0, 2, 0.1));
  EXPECT_TRUE(has_failure(r, "not multiples of the lattice step"));
}

TEST(ValidateSpec, NegativeHeightInVariableMode) {
  auto fn = single_variable_box();
  fn.heights(0) = -1.0;
  EXPECT_TRUE(has_failure(validate_spec(bin_creating(), fn, Lattice(1.0, 2, 0.1)), "positive heights"));
}

TEST(FirstMomentBlock, AtMeanIsBlockDiagonal) {
  const auto spec = bin_creating();
  const Matrix b = first_moment_block(spec.mean, spec);
  Matrix want = Matrix::Zero(3, 3);
  want.topLeftCorner(2, 2) = spec.cov;
  want(2, 2) = 0.1;
  EXPECT_TRUE(b.isApprox(want));
}

TEST(FirstMomentBlock, BinCreatingCorner) {
  const auto spec = bin_creating();
  Matrix want(3, 3);
  want << 2, 0.5, 1, 0.5, 1, 1, 1, 1, 0.1;
  EXPECT_TRUE(first_moment_block(vec({1, 1}), spec).isApprox(want, 1e-15));
}

TEST(FirstMomentBlock, OneDimensional) {
  AmbiguitySpec spec;
  spec.dim = 1;
  spec.mean = Vector::Zero(1);
  spec.cov = Matrix::Identity(1, 1);
  spec.eps_mu = 1.0;
  Matrix want(2, 2);
  want << 1, 0.5, 0.5, 1;
  EXPECT_TRUE(first_moment_block(vec({0.5}), spec).isApprox(want));
}

TEST(FirstMomentBlock, DimensionMismatch) {
  EXPECT_THROW(first_moment_block(vec({1, 1, 1}), bin_creating()), std::invalid_argument);
  EXPECT_THROW(second_moment_outer(vec({1}), bin_creating()), std::invalid_argument);
}

TEST(SecondMomentOuter, Examples) {
  const auto spec = bin_creating();
  EXPECT_TRUE(second_moment_outer(spec.mean, spec).isZero());
  Matrix unit = Matrix::Zero(2, 2);
  unit(0, 0) = 1;
  EXPECT_TRUE(second_moment_outer(vec({1, 0}), spec).isApprox(unit));
  Matrix want(2, 2);
  want << 0.09, 0.12, 0.12, 0.16;
  EXPECT_TRUE(second_moment_outer(vec({0.3, 0.4}), spec).isApprox(want, 1e-14));
}

TEST(PolyPart, Examples) {
  const auto spec = bin_creating();
  const Matrix z3 = Matrix::Zero(3, 3), z2 = Matrix::Zero(2, 2);
  EXPECT_EQ(poly_part(vec({0.7, 0.2}), z3, z2, spec), 0.0);
  EXPECT_NEAR(poly_part(vec({0.3, 0.4}), z3, Matrix::Identity(2, 2), spec), 0.25, 1e-15);
  Matrix corner = z3;
  corner(2, 2) = 1.0;
  for (const auto& t : {vec({0, 0}), vec({1, 0.3}), vec({0.25, 0.9})}) {
    EXPECT_NEAR(poly_part(t, corner, z2, spec), -0.1, 1e-15);
  }
}

TEST(Indicator, ClosedBox) {
  const auto box = box2(0.4, 0.6, 0.4, 0.6);
  EXPECT_EQ(indicator_box(vec({0.5, 0.5}), box), 1);
  EXPECT_EQ(indicator_box(vec({0.6, 0.4}), box), 1);
  EXPECT_EQ(indicator_box(vec({0.7, 0.5}), box), 0);
}

TEST(SmoothedIndicator, Examples) {
  const auto box = box2(0.4, 0.6, 0.4, 0.6);
  EXPECT_EQ(smoothed_indicator(vec({0.45, 0.55}), box, 0.1), 1.0);
  BoxRegion line{vec({0.3}), vec({0.5})};
  EXPECT_NEAR(smoothed_indicator(vec({0.25}), line, 0.1), 0.5, 1e-12);
  EXPECT_EQ(smoothed_indicator(vec({0.5, 0.3}), box, 0.1), 0.0);
  EXPECT_EQ(smoothed_indicator(vec({0.5, 0.25}), box, 0.1), 0.0);
}

TEST(InnerSmoothedIndicator, BelowIndicator) {
  const auto box = box2(0.2, 0.8, 0.2, 0.8);
  EXPECT_EQ(inner_smoothed_indicator(vec({0.5, 0.5}), box, 0.1), 1.0);
  EXPECT_EQ(inner_smoothed_indicator(vec({0.2, 0.5}), box, 0.1), 0.0);
  EXPECT_NEAR(inner_smoothed_indicator(vec({0.25, 0.5}), box, 0.1), 0.5, 1e-12);
}

TEST(Lattice, Examples) {
  const Lattice line(1.0, 1, 0.5);
  ASSERT_EQ(line.size(), 3u);
  EXPECT_EQ(line.point(0)(0), 0.0);
  EXPECT_EQ(line.point(1)(0), 0.5);
  EXPECT_EQ(line.point(2)(0), 1.0);
  EXPECT_EQ(Lattice(1.0, 2, 0.1).size(), 121u);
  EXPECT_EQ(Lattice(1.0, 2, 0.04).size(), 676u);
  EXPECT_EQ(Lattice(1.0, 2, 1.0 / 15).size(), 256u);
  EXPECT_THROW(Lattice(1.0, 2, 0.3), std::invalid_argument);
}

TEST(Lattice, RowMajorOrder) {
  const Lattice lat(1.0, 2, 0.5);
  EXPECT_TRUE(lat.point(1).isApprox(vec({0, 0.5})));
  EXPECT_TRUE(lat.point(3).isApprox(vec({0.5, 0})));
  for (std::size_t id = 0; id < lat.size(); ++id) EXPECT_EQ(lat.id_of(lat.index_of(id)), id);
  EXPECT_EQ(lat.forward(2, 1), std::nullopt);
  EXPECT_EQ(lat.forward(2, 0), std::optional<std::size_t>(5));
  EXPECT_EQ(lat.line(lat.line_starts(0)[1], 0), (std::vector<std::size_t>{1, 4, 7}));
}

TEST(LevelSets, AlignedRegionsHaveNearbyPoints) {
  const Lattice lat(1.0, 2, 0.1);
  EXPECT_FALSE(level_set_gap({box2(0.2, 0.5, 0.3, 0.3), box2(0, 1, 0.6, 0.9)}, lat).has_value());
}

// Properties.

TEST(Properties, SmoothedIndicatorDominatesIndicator) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10000; ++trial) {
    double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    const auto box = box2(std::min(a, b), std::max(a, b), std::min(c, d), std::max(c, d));
    const Vector t = vec({u(rng), u(rng)});
    const double delta = 0.01 + 0.2 * u(rng);
    ASSERT_GE(smoothed_indicator(t, box, delta), indicator_box(t, box));
    ASSERT_LE(inner_smoothed_indicator(t, box, delta), indicator_box(t, box));
  }
}

TEST(Properties, FirstMomentBlockIsAffine) {
  const auto spec = bin_creating();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector t = vec({u(rng), u(rng)}), s = vec({u(rng), u(rng)});
    const Matrix mid = first_moment_block(Vector((t + s) / 2), spec);
    const Matrix avg = (first_moment_block(t, spec) + first_moment_block(s, spec)) / 2;
    ASSERT_LE((mid - avg).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Properties, PolyPartIsQuadraticOnLines) {
  const auto spec = bin_creating();
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Matrix a1 = Matrix::Random(3, 3), a2 = Matrix::Random(2, 2);
    const Matrix y1 = a1 * a1.transpose(), y2 = a2 * a2.transpose();
    const Vector p = vec({u(rng), u(rng)}), d = vec({u(rng) - 0.5, u(rng) - 0.5});
    auto q = [&](double s) { return poly_part(Vector(p + s * d), y1, y2, spec); };
    // Lagrange interpolation through s = 0, 1, 2, evaluated at s = 3.
    const double predicted = q(0) - 3 * q(1) + 3 * q(2);
    ASSERT_NEAR(q(3), predicted, 1e-10);
  }
}

TEST(Properties, SchurEquivalence) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  int agreements = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 1 + trial % 4;
    Matrix a(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) a(i, j) = n(rng);
    }
    const Matrix sigma = a * a.transpose() + 0.1 * Matrix::Identity(m, m);
    Vector v(m);
    for (int i = 0; i < m; ++i) v(i) = n(rng);
    const double schur_value = v.dot(sigma.ldlt().solve(v));
    // Straddle the boundary eps = v' Sigma^-1 v.
    const double eps = schur_value + (trial % 2 == 0 ? 1.0 : -1.0) * std::abs(n(rng)) * 0.5 + 1e-7;
    Matrix block(m + 1, m + 1);
    block.topLeftCorner(m, m) = sigma;
    block.topRightCorner(m, 1) = v;
    block.bottomLeftCorner(1, m) = v.transpose();
    block(m, m) = eps;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(block, Eigen::EigenvaluesOnly);
    const bool lmi = eig.eigenvalues()(0) >= -1e-8;
    const bool schur = eps - schur_value >= -1e-8;
    agreements += lmi == schur;
  }
  EXPECT_EQ(agreements, 1000);
}
