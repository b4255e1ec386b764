#include "safedro/model.hpp"

#include <Eigen/Eigenvalues>

#include <sstream>

namespace safedro {

Lattice::Lattice(double edge, int dim, double step) : edge_(edge), step_(step), dim_(dim) {
  if (dim <= 0) throw std::invalid_argument("lattice: dimension must be positive");
  if (!(step > 0.0) || !(edge > 0.0)) throw std::invalid_argument("lattice: step and edge must be positive");
  const double ratio = edge / step;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream msg;
    msg << "lattice: M/delta = " << ratio << " is not an integer";
    throw std::invalid_argument(msg.str());
  }
  per_axis_ = static_cast<int>(rounded) + 1;
  strides_.assign(dim, 1);
  for (int j = dim - 2; j >= 0; --j) strides_[j] = strides_[j + 1] * per_axis_;
  size_ = strides_[0] * per_axis_;
}

std::vector<int> Lattice::index_of(std::size_t id) const {
  std::vector<int> index(dim_);
  for (int j = 0; j < dim_; ++j) {
    index[j] = static_cast<int>(id / strides_[j]);
    id %= strides_[j];
  }
  return index;
}

std::size_t Lattice::id_of(const std::vector<int>& index) const {
  std::size_t id = 0;
  for (int j = 0; j < dim_; ++j) id += strides_[j] * static_cast<std::size_t>(index[j]);
  return id;
}

Vector Lattice::point(std::size_t id) const {
  Vector p(dim_);
  const auto index = index_of(id);
  for (int j = 0; j < dim_; ++j) p(j) = coord(index[j]);
  return p;
}

std::optional<std::size_t> Lattice::forward(std::size_t id, int axis) const {
  const auto pos = (id / strides_[axis]) % per_axis_;
  if (static_cast<int>(pos) + 1 >= per_axis_) return std::nullopt;
  return id + strides_[axis];
}

bool Lattice::aligned(double x, double tol) const {
  const double r = x / step_;
  return std::abs(r - std::round(r)) * step_ <= tol;
}

std::vector<std::size_t> Lattice::line_starts(int axis) const {
  std::vector<std::size_t> starts;
  for (std::size_t id = 0; id < size_; ++id) {
    if ((id / strides_[axis]) % per_axis_ == 0) starts.push_back(id);
  }
  return starts;
}

std::vector<std::size_t> Lattice::line(std::size_t start, int axis) const {
  std::vector<std::size_t> ids(per_axis_);
  for (int l = 0; l < per_axis_; ++l) ids[l] = start + static_cast<std::size_t>(l) * strides_[axis];
  return ids;
}

Lattice lattice_points(double edge, int dim, double step) { return Lattice(edge, dim, step); }

std::vector<std::string> ValidationReport::failures() const {
  std::vector<std::string> out;
  for (const auto& item : items) {
    if (!item.passed) out.push_back(item.message);
  }
  return out;
}

BoxRegion as_box(const Region& region, int dim, double edge) {
  if (const auto* box = std::get_if<BoxRegion>(&region)) return *box;
  return {Vector::Zero(dim), Vector::Constant(dim, edge)};
}

namespace {

std::vector<int> pattern_at(const Vector& t, const std::vector<BoxRegion>& regions) {
  std::vector<int> pattern(regions.size());
  for (std::size_t r = 0; r < regions.size(); ++r) pattern[r] = indicator_box(t, regions[r]);
  return pattern;
}

bool is_symmetric(const Matrix& a, double tol) {
  return a.rows() == a.cols() && (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, a.cwiseAbs().maxCoeff());
}

}  // namespace

std::optional<Vector> level_set_gap(const std::vector<BoxRegion>& regions, const Lattice& lattice) {
  const int m = lattice.dim();
  const double h = lattice.step();
  const int faces = 1 << m;
  for (std::size_t id = 0; id < lattice.size(); ++id) {
    const auto index = lattice.index_of(id);
    const Vector base = lattice.point(id);
    for (int mask = 1; mask < faces; ++mask) {
      bool inside = true;
      Vector center = base;
      for (int j = 0; j < m; ++j) {
        if (mask & (1 << j)) {
          if (index[j] + 1 >= lattice.per_axis()) inside = false;
          center(j) += 0.5 * h;
        }
      }
      if (!inside) continue;
      const auto want = pattern_at(center, regions);
      bool matched = false;
      // Vertices of the face are the sub-masks.
      for (int sub = mask;; sub = (sub - 1) & mask) {
        Vector vertex = base;
        for (int j = 0; j < m; ++j) {
          if (sub & (1 << j)) vertex(j) += h;
        }
        if (pattern_at(vertex, regions) == want) {
          matched = true;
          break;
        }
        if (sub == 0) break;
      }
      if (!matched) return center;
    }
  }
  return std::nullopt;
}

ValidationReport validate_spec(const AmbiguitySpec& spec, const SimpleFunctionSpec& fn, const Lattice& lattice,
                               const Tolerances& tol) {
  ValidationReport report;
  auto check = [&report](const std::string& name, bool ok, const std::string& message) {
    report.items.push_back({name, ok, ok ? std::string() : message});
  };
  const int m = spec.dim;

  check("dim", m > 0, "dimension must be positive");
  check("domain_edge", spec.domain_edge > 0, "domain edge M must be positive");
  if (m <= 0) return report;

  const bool shapes = spec.mean.size() == m && spec.cov.rows() == m && spec.cov.cols() == m;
  check("shapes", shapes, "mean/covariance dimensions do not match m");
  if (!shapes) return report;

  const bool sym = is_symmetric(spec.cov, 1e-12);
  check("sigma_symmetric", sym, "Sigma not symmetric");
  if (sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(spec.cov, Eigen::EigenvaluesOnly);
    check("sigma_pd", eig.eigenvalues()(0) > 0, "Sigma not positive definite");
  }
  check("eps_mu", spec.eps_mu >= 0, "eps_mu must be nonnegative");
  check("eps_sigma", spec.eps_sigma >= 1, "eps_sigma must be >= 1");
  check("mean_position", spec.mean.minCoeff() <= spec.domain_edge / 2 + tol.alignment,
        "min_j mu_j must not exceed M/2");

  const auto& sets = spec.confidence_sets;
  const bool normalized = sets.size() >= 2 && std::holds_alternative<WholeDomain>(sets[0].region) &&
                          sets[0].eps == -1.0 && std::holds_alternative<WholeDomain>(sets[1].region) &&
                          sets[1].eps == 1.0;
  check("normalization_pair", normalized,
        "confidence sets 1 and 2 must be (whole domain, -1) and (whole domain, +1)");

  auto box_ok = [&](const BoxRegion& box, const std::string& what) {
    if (box.lower.size() != m || box.upper.size() != m) {
      check(what, false, what + ": dimension mismatch");
      return false;
    }
    const bool ordered = (box.lower.array() <= box.upper.array()).all();
    const bool contained = box.lower.minCoeff() >= -tol.alignment &&
                           box.upper.maxCoeff() <= spec.domain_edge + tol.alignment;
    check(what + "_order", ordered, what + ": lower bound exceeds upper bound");
    check(what + "_domain", contained, what + ": box leaves the domain [0,M]^m");
    bool aligned = true;
    for (int j = 0; j < m; ++j) {
      aligned = aligned && lattice.aligned(box.lower(j), tol.alignment) &&
                lattice.aligned(box.upper(j), tol.alignment);
    }
    check(what + "_aligned", aligned, what + ": bounds are not multiples of the lattice step");
    return ordered && contained && aligned;
  };

  std::vector<BoxRegion> aligned_regions;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto& cs = sets[i];
    const std::string name = "confidence_set_" + std::to_string(i + 1);
    check(name + "_eps", cs.eps != 0.0 && std::abs(cs.eps) <= 1.0, name + ": eps must lie in [-1,1] \\ {0}");
    if (i < 2) continue;
    if (const auto* box = std::get_if<BoxRegion>(&cs.region)) {
      if (box_ok(*box, name)) aligned_regions.push_back(*box);
      if (box->lower.size() == m && box->upper.size() == m) {
        const int inside = indicator_box(spec.mean, *box);
        if (cs.eps > 0) check(name + "_mean", inside == 1, "mean outside positive-mass confidence set");
        if (cs.eps < 0) check(name + "_mean", inside == 0, "mean inside negative-mass confidence set");
      }
    } else if (cs.eps < 0) {
      check(name + "_mean", false, "mean inside negative-mass confidence set");
    }
  }

  check("heights", fn.k() >= 1, "simple function needs at least one height");
  if (const auto* fixed = std::get_if<FixedBoxes>(&fn.mode)) {
    check("box_count", static_cast<int>(fixed->boxes.size()) == fn.k(), "number of boxes must equal k");
    for (std::size_t i = 0; i < fixed->boxes.size(); ++i) {
      if (box_ok(fixed->boxes[i], "box_" + std::to_string(i + 1))) aligned_regions.push_back(fixed->boxes[i]);
    }
    if (fixed->free_heights) {
      bool dims = fixed->free_heights->objective.size() == fn.k();
      for (const auto& row : fixed->free_heights->rows) dims = dims && row.coeffs.size() == fn.k();
      check("height_polytope", dims, "height polytope rows must have k coefficients");
    }
  } else {
    const auto& var = fn.variable();
    check("heights_positive", fn.k() >= 1 && fn.heights.minCoeff() > 0, "variable boxes require positive heights");
    if (var.objective == VariableBoxes::Objective::kLinear) {
      check("objective_shape",
            var.c_minus.rows() == fn.k() && var.c_minus.cols() == m && var.c_plus.rows() == fn.k() &&
                var.c_plus.cols() == m,
            "objective coefficients must be k x m");
    }
    for (const auto& row : var.box_rows) {
      check("box_row_shape",
            row.coeff_minus.rows() == fn.k() && row.coeff_minus.cols() == m && row.coeff_plus.rows() == fn.k() &&
                row.coeff_plus.cols() == m,
            "box constraint coefficients must be k x m");
    }
  }

  if (report.passed() && !aligned_regions.empty()) {
    const auto gap = level_set_gap(aligned_regions, lattice);
    std::ostringstream msg;
    if (gap) msg << "level set without a lattice point within sqrt(m)*delta near " << gap->transpose();
    check("level_sets", !gap, msg.str());
  }
  return report;
}

}  // namespace safedro
