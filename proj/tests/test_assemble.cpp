#include "encoding_check.hpp"
#include "instances.hpp"

#include "safedro/assemble.hpp"

#include <gtest/gtest.h>

using namespace safedro;
using namespace instances;

namespace {

int count_tag(const AssembledModel& model, const std::string& tag) {
  int n = 0;
  for (const auto& row : model.program.rows) n += row.tag == tag;
  return n;
}

std::vector<Matrix> zero_psd(const AssembledModel& model) {
  std::vector<Matrix> psd;
  for (const auto& pv : model.program.psd_vars) psd.push_back(Matrix::Zero(pv.dim, pv.dim));
  return psd;
}

bool satisfied(const LinearConstraint& row, const Vector& v, const std::vector<Matrix>& psd) {
  const double a = row_activity(row, v, psd);
  switch (row.sense) {
    case RowSense::kLessEqual: return a <= row.rhs + 1e-9;
    case RowSense::kGreaterEqual: return a >= row.rhs - 1e-9;
    case RowSense::kEqual: return std::abs(a - row.rhs) <= 1e-9;
  }
  return false;
}

Vector with_pattern(const AssembledModel& model, const std::vector<int>& marked) {
  Vector v = Vector::Zero(model.program.scalars.size());
  for (const int t : marked) v(model.var_index.btilde[0][t]) = 1.0;
  return v;
}

}  // namespace

TEST(AssembleCase1, WholeDomainBoxRow) {
  const auto spec = bin_creating();
  const double L = 6.0;
  auto fn = fixed_box(box2(0, 1, 0, 1));
  fn.heights(0) = 1.0;
  const auto model = assemble_case1(spec, fn, Lattice(1.0, 2, 0.1), L);
  EXPECT_EQ(model.sampled_rows.size(), 121u);
  EXPECT_EQ(count_tag(model, row_tag::kThreshold), 1);
  EXPECT_EQ(model.program.num_binaries(), 0);
  EXPECT_NEAR(model.margin, L * 0.1 * std::sqrt(2.0), 1e-15);
  // 1 - <block, Y1> + <outer, Y2> + y1 - y2 >= margin.
  const auto& row = model.program.rows[model.sampled_rows[37]];
  const Vector t = model.lattice.point(37);
  EXPECT_NEAR(row.rhs, model.margin - 1.0, 1e-15);
  ASSERT_EQ(row.psd_terms.size(), 2u);
  EXPECT_TRUE(row.psd_terms[0].coeff.isApprox(-first_moment_block(t, spec)));
  EXPECT_TRUE(row.psd_terms[1].coeff.isApprox(second_moment_outer(t, spec)));
  ASSERT_EQ(row.scalar_terms.size(), 2u);
  EXPECT_EQ(row.scalar_terms[0], std::make_pair(model.var_index.y[0], 1.0));
  EXPECT_EQ(row.scalar_terms[1], std::make_pair(model.var_index.y[1], -1.0));
}

TEST(AssembleCase1, RejectsMisalignedAndEmpty) {
  const auto spec = bin_creating();
  EXPECT_THROW(assemble_case1(spec, fixed_box(box2(0, 0.55, 0, 1)), Lattice(1.0, 2, 0.1), 6.0),
               std::invalid_argument);
  SimpleFunctionSpec none;
  none.heights = Vector(0);
  none.mode = FixedBoxes{};
  EXPECT_THROW(assemble_case1(spec, none, Lattice(1.0, 2, 0.1), 6.0), std::invalid_argument);
}

TEST(AssembleCase1, HeightPolytopeVariables) {
  SimpleFunctionSpec fn;
  fn.heights = Vector::Constant(2, 0.5);
  FixedBoxes fixed{{box2(0, 1, 0, 1), box2(0, 0.5, 0, 1)}, FixedBoxes::HeightPolytope{}};
  fixed.free_heights->objective = vec({0, 1});
  fixed.free_heights->rows = {{vec({1, 1}), RowSense::kEqual, 1.0}};
  fn.mode = fixed;
  const auto model = assemble_case1(bin_creating(), fn, Lattice(1.0, 2, 0.25), 6.0);
  ASSERT_EQ(model.var_index.heights.size(), 2u);
  EXPECT_EQ(count_tag(model, row_tag::kHeights), 1);
  EXPECT_TRUE(model.program.objective.maximize);
  // Point (0.75, 0.5) lies in box 1 only.
  const auto& row = model.program.rows[model.sampled_rows[model.lattice.id_of({3, 2})]];
  int h1 = 0, h2 = 0;
  for (const auto& [var, c] : row.scalar_terms) {
    h1 += var == model.var_index.heights[0];
    h2 += var == model.var_index.heights[1];
  }
  EXPECT_EQ(h1, 1);
  EXPECT_EQ(h2, 0);
}

TEST(AssembleCase2, BinCreatingCounts) {
  const auto model = assemble_case2(bin_creating(), single_variable_box(), Lattice(1.0, 2, 0.1), 6.0);
  int btilde = 0, jumps = 0;
  for (std::size_t i = 0; i < model.program.scalars.size(); ++i) {
    const auto& name = model.program.scalars[i].name;
    if (model.program.scalars[i].kind != VarKind::kBinary) continue;
    (name.rfind("b_", 0) == 0 ? btilde : jumps) += 1;
  }
  EXPECT_EQ(btilde, 121);
  EXPECT_EQ(jumps, 484);
  EXPECT_EQ(model.sampled_rows.size(), 121u);
  EXPECT_EQ(count_tag(model, row_tag::kJump), 2 * 121);
  EXPECT_EQ(count_tag(model, row_tag::kJumpCount), 2 * 11);
  EXPECT_EQ(count_tag(model, row_tag::kWidthLine), 2 * 11);
  EXPECT_EQ(count_tag(model, row_tag::kWidthAux), 4);
}

TEST(AssembleCase2, RowCountFormulas) {
  for (const double step : {0.5, 0.25, 0.2, 0.1}) {
    for (const int m : {1, 2}) {
      auto spec = bin_creating();
      if (m == 1) {
        spec.dim = 1;
        spec.mean = Vector::Zero(1);
        spec.cov = Matrix::Identity(1, 1);
      }
      const Lattice lat(1.0, m, step);
      const auto model = assemble_case2(spec, single_variable_box(), lat, 6.0);
      const int n = static_cast<int>(lat.size()), lines = n / lat.per_axis();
      EXPECT_EQ(model.program.num_binaries(), n + 2 * m * n);
      EXPECT_EQ(static_cast<int>(model.sampled_rows.size()), n);
      EXPECT_EQ(count_tag(model, row_tag::kJump), m * n);
      EXPECT_EQ(count_tag(model, row_tag::kLowerEdge), m * lines);
      EXPECT_EQ(count_tag(model, row_tag::kUpperEdge), m * lines);
      EXPECT_EQ(count_tag(model, row_tag::kWidthOrder), m);
    }
  }
}

TEST(AssembleCase2, RejectsNonpositiveHeights) {
  auto fn = single_variable_box();
  fn.heights(0) = 0.0;
  EXPECT_THROW(assemble_case2(bin_creating(), fn, Lattice(1.0, 2, 0.1), 6.0), std::invalid_argument);
}

TEST(AssembleCase2, ShortLineAssignmentIsUnique) {
  AmbiguitySpec spec = bin_creating();
  spec.dim = 1;
  spec.domain_edge = 0.2;
  spec.mean = Vector::Zero(1);
  spec.cov = Matrix::Identity(1, 1);
  const auto model = assemble_case2(spec, single_variable_box(), Lattice(0.2, 1, 0.1), 6.0);
  const auto& idx = model.var_index;
  const auto psd = zero_psd(model);
  int feasible = 0;
  Vector found;
  for (int bits = 0; bits < 8; ++bits) {
    for (int jumps = 0; jumps < 64; ++jumps) {
      Vector v = Vector::Zero(model.program.scalars.size());
      for (int t = 0; t < 3; ++t) {
        v(idx.btilde[0][t]) = bits >> t & 1;
        v(idx.delta_minus[0][0][t]) = jumps >> (2 * t) & 1;
        v(idx.delta_plus[0][0][t]) = jumps >> (2 * t + 1) & 1;
      }
      v(idx.x_minus[0][0]) = 0.1;
      v(idx.x_plus[0][0]) = 0.2;
      bool ok = true;
      for (const auto& row : model.program.rows) {
        if (row.tag == row_tag::kSampled || row.tag == row_tag::kThreshold || row.tag == row_tag::kTraceCap ||
            row.tag == row_tag::kWidthAux) {
          continue;
        }
        ok = ok && satisfied(row, v, psd);
      }
      if (ok && bits == 0b110) {
        ++feasible;
        found = v;
      }
    }
  }
  ASSERT_EQ(feasible, 1);
  EXPECT_EQ(found(idx.delta_minus[0][0][0]), 1.0);
  EXPECT_EQ(found(idx.delta_plus[0][0][2]), 1.0);
  EXPECT_EQ(found(idx.delta_minus[0][0][1]) + found(idx.delta_plus[0][0][1]) + found(idx.delta_plus[0][0][0]) +
                found(idx.delta_minus[0][0][2]),
            0.0);
  // The edge rows at this assignment read x- >= 0.1 and x+ <= 0.2.
  for (const auto& row : model.program.rows) {
    if (row.tag != row_tag::kLowerEdge && row.tag != row_tag::kUpperEdge) continue;
    Vector v = found;
    v(idx.x_minus[0][0]) = 0.0;
    v(idx.x_plus[0][0]) = 0.0;
    const double bound = row.rhs - row_activity(row, v, psd);
    EXPECT_NEAR(bound, row.tag == row_tag::kLowerEdge ? 0.1 : 0.2, 1e-12);
  }
}

TEST(DecodeBox, Examples) {
  const auto model = assemble_case2(bin_creating(), single_variable_box(), Lattice(1.0, 2, 0.1), 6.0);
  std::vector<int> all(121), square;
  for (int t = 0; t < 121; ++t) all[t] = t;
  auto full = decode_box(model, with_pattern(model, all));
  ASSERT_EQ(full.boxes.size(), 1u);
  EXPECT_TRUE(full.boxes[0].lower.isZero());
  EXPECT_TRUE(full.boxes[0].upper.isApprox(vec({1, 1})));
  for (int a = 3; a <= 5; ++a) {
    for (int b = 3; b <= 5; ++b) square.push_back(model.lattice.id_of({a, b}));
  }
  const auto sq = decode_box(model, with_pattern(model, square));
  EXPECT_TRUE(sq.boxes[0].lower.isApprox(vec({0.3, 0.3})));
  EXPECT_TRUE(sq.boxes[0].upper.isApprox(vec({0.5, 0.5})));
  const auto none = decode_box(model, with_pattern(model, {}));
  EXPECT_TRUE(none.empty[0]);
  EXPECT_TRUE(none.boxes[0].lower.isZero());
  EXPECT_TRUE(none.boxes[0].upper.isZero());
  EXPECT_FALSE(none.warnings.empty());
  EXPECT_THROW(decode_box(model, with_pattern(model, {0, 2})), std::runtime_error);
}

TEST(DecodeBox, FallbackAssignment) {
  const auto model = assemble_case2(bin_creating(), single_variable_box(), Lattice(1.0, 2, 0.1), 6.0);
  const GridBox full{{0, 0}, {10, 10}, false};
  const Vector v = canonical_values(model, {full});
  const auto psd = zero_psd(model);
  for (const auto& row : model.program.rows) {
    if (row.tag == row_tag::kSampled || row.tag == row_tag::kThreshold || row.tag == row_tag::kTraceCap) continue;
    EXPECT_TRUE(satisfied(row, v, psd)) << row.tag;
  }
  // Only the line ends carry a jump.
  for (int j = 0; j < 2; ++j) {
    for (std::size_t t = 0; t < model.lattice.size(); ++t) {
      EXPECT_EQ(v(model.var_index.delta_minus[0][j][t]), 0.0);
      EXPECT_EQ(v(model.var_index.delta_plus[0][j][t]), model.lattice.forward(t, j) ? 0.0 : 1.0);
    }
  }
  const auto decoded = decode_box(model, v);
  EXPECT_TRUE(decoded.boxes[0].upper.isApprox(vec({1, 1})));
}

TEST(Encoding, ExhaustiveOneDimensional) {
  for (int n = 3; n <= 7; ++n) {
    const auto r = encoding_check::run(1, n);
    EXPECT_EQ(r.patterns, 1L << n);
    EXPECT_EQ(r.soundness_violations, 0) << r.first_violation;
    EXPECT_EQ(r.completeness_violations, 0) << r.first_violation;
    EXPECT_EQ(r.boxes, n * (n + 1) / 2);
    // Every nonempty box plus the empty pattern.
    EXPECT_EQ(r.feasible_patterns, r.boxes + 1);
  }
}

TEST(Encoding, ExhaustiveTwoDimensional) {
  for (int n = 2; n <= 5; ++n) {
    const auto r = encoding_check::run(2, n);
    EXPECT_EQ(r.soundness_violations, 0) << r.first_violation;
    EXPECT_EQ(r.completeness_violations, 0) << r.first_violation;
    EXPECT_EQ(r.boxes, (n * (n + 1) / 2) * (n * (n + 1) / 2));
    EXPECT_EQ(r.feasible_patterns, r.boxes + 1);
  }
}

TEST(Encoding, CheckerFlagsMissingEdgeRows) {
  auto model = encoding_check::small_model(1, 5);
  auto& rows = model.program.rows;
  rows.erase(std::remove_if(rows.begin(), rows.end(),
                            [](const LinearConstraint& r) { return r.tag == row_tag::kLowerEdge; }),
             rows.end());
  EXPECT_GT(encoding_check::run(model).soundness_violations, 0);
}

TEST(Encoding, CheckerFlagsMissingJumpRows) {
  auto model = encoding_check::small_model(2, 3);
  auto& rows = model.program.rows;
  rows.erase(std::remove_if(rows.begin(), rows.end(), [](const LinearConstraint& r) { return r.tag == row_tag::kJump; }),
             rows.end());
  const auto r = encoding_check::run(model);
  EXPECT_GT(r.feasible_patterns, r.boxes + 1);
  EXPECT_GT(r.soundness_violations, 0);
}
