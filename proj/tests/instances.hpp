#pragma once

#include "safedro/model.hpp"

namespace instances {

using namespace safedro;

// The bin-creating instance: m = 2 on [0,1]^2 with only the normalization pair.
inline AmbiguitySpec bin_creating() {
  AmbiguitySpec spec;
  spec.dim = 2;
  spec.domain_edge = 1.0;
  spec.mean = Vector::Zero(2);
  spec.cov.resize(2, 2);
  spec.cov << 2.0, 0.5, 0.5, 1.0;
  spec.eps_mu = 0.1;
  spec.eps_sigma = 1.0;
  spec.threshold = 0.1;
  spec.confidence_sets = AmbiguitySpec::normalization_pair();
  return spec;
}

// One box of height 1 whose width sum is minimized.
inline SimpleFunctionSpec single_variable_box() {
  SimpleFunctionSpec fn;
  fn.heights = Vector::Ones(1);
  fn.mode = VariableBoxes{};
  return fn;
}

inline SimpleFunctionSpec fixed_box(const BoxRegion& box, double height = 1.0) {
  SimpleFunctionSpec fn;
  fn.heights = Vector::Constant(1, height);
  fn.mode = FixedBoxes{{box}, std::nullopt};
  return fn;
}

inline BoxRegion box2(double l0, double u0, double l1, double u1) {
  BoxRegion b{Vector(2), Vector(2)};
  b.lower << l0, l1;
  b.upper << u0, u1;
  return b;
}

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (const double x : values) v(i++) = x;
  return v;
}

}  // namespace instances
