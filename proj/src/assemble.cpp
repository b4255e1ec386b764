#include "safedro/assemble.hpp"

#include <cmath>
#include <stdexcept>

namespace safedro {

namespace {

double margin_of(const AmbiguitySpec& spec, const Lattice& lattice, double L, const AssemblyOptions& opts) {
  if (opts.margin_override) return *opts.margin_override;
  return L * lattice.step() * std::sqrt(static_cast<double>(spec.dim));
}

// Y1, Y2, y, the threshold row, and the trace caps.
void add_moment_part(AssembledModel& model, const AssemblyOptions& opts) {
  auto& p = model.program;
  auto& idx = model.var_index;
  const auto& spec = model.spec;
  const int m = spec.dim;
  idx.y1 = p.add_psd("Y1", m + 1);
  idx.y2 = p.add_psd("Y2", m);
  LinearConstraint threshold;
  for (std::size_t c = 0; c < spec.confidence_sets.size(); ++c) {
    const int v = p.add_scalar("y" + std::to_string(c + 1), VarKind::kNonneg);
    idx.y.push_back(v);
    threshold.scalar_terms.emplace_back(v, spec.confidence_sets[c].eps);
  }
  threshold.psd_terms.push_back({idx.y2, -spec.eps_sigma * spec.cov});
  threshold.sense = RowSense::kGreaterEqual;
  threshold.rhs = spec.threshold;
  threshold.tag = row_tag::kThreshold;
  model.threshold_row = p.add_row(threshold);
  if (opts.tr_y1_max) {
    p.add_row({{}, {{idx.y1, Matrix::Identity(m + 1, m + 1)}}, RowSense::kLessEqual, *opts.tr_y1_max,
               row_tag::kTraceCap});
  }
  if (opts.tr_y2_max) {
    p.add_row({{}, {{idx.y2, Matrix::Identity(m, m)}}, RowSense::kLessEqual, *opts.tr_y2_max, row_tag::kTraceCap});
  }
}

// Moment and confidence terms of the sampled row at lattice point t.
LinearConstraint sampled_row_base(const AssembledModel& model, const Vector& t) {
  const auto& spec = model.spec;
  const auto& idx = model.var_index;
  LinearConstraint row;
  row.psd_terms.push_back({idx.y1, -first_moment_block(t, spec)});
  row.psd_terms.push_back({idx.y2, second_moment_outer(t, spec)});
  for (std::size_t c = 0; c < spec.confidence_sets.size(); ++c) {
    const auto& cs = spec.confidence_sets[c];
    const int inside = region_indicator(t, cs.region);
    if (inside) row.scalar_terms.emplace_back(idx.y[c], -sign_of(cs.eps));
  }
  row.sense = RowSense::kGreaterEqual;
  row.rhs = model.margin;
  row.tag = row_tag::kSampled;
  return row;
}

void require_valid(const AmbiguitySpec& spec, const SimpleFunctionSpec& fn, const Lattice& lattice) {
  if (lattice.dim() != spec.dim) throw std::invalid_argument("lattice dimension differs from the ambiguity set");
  if (std::abs(lattice.edge() - spec.domain_edge) > 1e-12) {
    throw std::invalid_argument("lattice edge differs from the domain edge");
  }
  if (fn.k() < 1) throw std::invalid_argument("simple function needs at least one height");
}

}  // namespace

AssembledModel assemble_case1(const AmbiguitySpec& spec, const SimpleFunctionSpec& fn, const Lattice& lattice,
                              double L, const AssemblyOptions& opts) {
  require_valid(spec, fn, lattice);
  if (!fn.is_fixed()) throw std::invalid_argument("assemble_case1 needs fixed boxes");
  const auto& fixed = fn.fixed();
  if (static_cast<int>(fixed.boxes.size()) != fn.k() || fixed.boxes.empty()) {
    throw std::invalid_argument("assemble_case1: number of boxes must equal k >= 1");
  }
  for (const auto& box : fixed.boxes) {
    for (int j = 0; j < spec.dim; ++j) {
      if (!lattice.aligned(box.lower(j)) || !lattice.aligned(box.upper(j))) {
        throw std::invalid_argument("assemble_case1: box bounds are not lattice-aligned");
      }
    }
  }
  AssembledModel model;
  model.kind = AssembledModel::Kind::kFixedBoxes;
  model.spec = spec;
  model.fn = fn;
  model.lattice = lattice;
  model.L = L;
  model.margin = margin_of(spec, lattice, L, opts);
  add_moment_part(model, opts);
  auto& p = model.program;
  auto& idx = model.var_index;
  const int k = fn.k();

  if (fixed.free_heights) {
    for (int i = 0; i < k; ++i) idx.heights.push_back(p.add_scalar("x" + std::to_string(i + 1)));
    for (const auto& hr : fixed.free_heights->rows) {
      LinearConstraint row;
      for (int i = 0; i < k; ++i) {
        if (hr.coeffs(i) != 0.0) row.scalar_terms.emplace_back(idx.heights[i], hr.coeffs(i));
      }
      row.sense = hr.sense;
      row.rhs = hr.rhs;
      row.tag = row_tag::kHeights;
      p.add_row(row);
    }
    p.objective.maximize = true;
    for (int i = 0; i < k; ++i) {
      if (fixed.free_heights->objective(i) != 0.0) {
        p.objective.scalar_terms.emplace_back(idx.heights[i], fixed.free_heights->objective(i));
      }
    }
  }

  for (std::size_t t = 0; t < lattice.size(); ++t) {
    const Vector pt = lattice.point(t);
    auto row = sampled_row_base(model, pt);
    for (int i = 0; i < k; ++i) {
      if (!indicator_box(pt, fixed.boxes[i])) continue;
      if (fixed.free_heights) {
        row.scalar_terms.emplace_back(idx.heights[i], 1.0);
      } else {
        row.rhs -= fn.heights(i);
      }
    }
    model.sampled_rows.push_back(p.add_row(std::move(row)));
  }
  return model;
}

AssembledModel assemble_case2(const AmbiguitySpec& spec, const SimpleFunctionSpec& fn, const Lattice& lattice,
                              double L, const AssemblyOptions& opts) {
  require_valid(spec, fn, lattice);
  if (!fn.is_variable()) throw std::invalid_argument("assemble_case2 needs variable boxes");
  if (fn.heights.minCoeff() <= 0) throw std::invalid_argument("assemble_case2: heights must be positive");
  const auto& var = fn.variable();
  AssembledModel model;
  model.kind = AssembledModel::Kind::kVariableBoxes;
  model.spec = spec;
  model.fn = fn;
  model.lattice = lattice;
  model.L = L;
  model.margin = margin_of(spec, lattice, L, opts);
  add_moment_part(model, opts);
  auto& p = model.program;
  auto& idx = model.var_index;
  const int k = fn.k(), m = spec.dim;
  const std::size_t n = lattice.size();
  const double delta = lattice.step();
  const double M = spec.domain_edge;

  idx.btilde.assign(k, std::vector<int>(n));
  idx.delta_minus.assign(k, std::vector<std::vector<int>>(m, std::vector<int>(n)));
  idx.delta_plus = idx.delta_minus;
  idx.x_minus.assign(k, std::vector<int>(m));
  idx.x_plus = idx.x_minus;
  for (int i = 0; i < k; ++i) {
    for (std::size_t t = 0; t < n; ++t) idx.btilde[i][t] = p.add_binary("b_" + std::to_string(i) + "_" + std::to_string(t));
  }
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < m; ++j) {
      for (std::size_t t = 0; t < n; ++t) {
        const std::string suffix = std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(t);
        idx.delta_minus[i][j][t] = p.add_binary("dm_" + suffix);
        idx.delta_plus[i][j][t] = p.add_binary("dp_" + suffix);
      }
    }
  }
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < m; ++j) {
      const std::string suffix = std::to_string(i) + "_" + std::to_string(j);
      idx.x_minus[i][j] = p.add_scalar("xm_" + suffix, VarKind::kFree, 0.0, M);
      idx.x_plus[i][j] = p.add_scalar("xp_" + suffix, VarKind::kFree, 0.0, M);
    }
  }

  for (std::size_t t = 0; t < n; ++t) {
    auto row = sampled_row_base(model, lattice.point(t));
    for (int i = 0; i < k; ++i) row.scalar_terms.emplace_back(idx.btilde[i][t], fn.heights(i));
    model.sampled_rows.push_back(p.add_row(std::move(row)));
  }

  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < m; ++j) {
      const int xm = idx.x_minus[i][j], xp = idx.x_plus[i][j];
      for (std::size_t t = 0; t < n; ++t) {
        LinearConstraint jump;
        if (const auto next = lattice.forward(t, j)) jump.scalar_terms.emplace_back(idx.btilde[i][*next], 1.0);
        jump.scalar_terms.emplace_back(idx.btilde[i][t], -1.0);
        jump.scalar_terms.emplace_back(idx.delta_minus[i][j][t], -1.0);
        jump.scalar_terms.emplace_back(idx.delta_plus[i][j][t], 1.0);
        jump.sense = RowSense::kEqual;
        jump.rhs = 0.0;
        jump.tag = row_tag::kJump;
        p.add_row(std::move(jump));
      }
      for (const std::size_t start : lattice.line_starts(j)) {
        const auto line = lattice.line(start, j);
        LinearConstraint count, lower, upper, width, coupling;
        lower.scalar_terms.emplace_back(xm, 1.0);
        upper.scalar_terms.emplace_back(xp, 1.0);
        width.scalar_terms = {{xp, 1.0}, {xm, -1.0}};
        coupling.scalar_terms = {{xp, 1.0}, {xm, -1.0}};
        for (std::size_t l = 0; l < line.size(); ++l) {
          const double pos = lattice.coord(static_cast<int>(l));
          const int dm = idx.delta_minus[i][j][line[l]];
          const int dp = idx.delta_plus[i][j][line[l]];
          count.scalar_terms.emplace_back(dm, 1.0);
          count.scalar_terms.emplace_back(dp, 1.0);
          lower.scalar_terms.emplace_back(dm, -(pos + delta));
          upper.scalar_terms.emplace_back(dp, M - pos);
          width.scalar_terms.emplace_back(dp, -pos);
          width.scalar_terms.emplace_back(dm, pos + delta);
          coupling.scalar_terms.emplace_back(idx.btilde[i][line[l]], -delta);
        }
        count.sense = RowSense::kLessEqual;
        count.rhs = 2.0;
        count.tag = row_tag::kJumpCount;
        lower.sense = RowSense::kGreaterEqual;
        lower.rhs = 0.0;
        lower.tag = row_tag::kLowerEdge;
        upper.sense = RowSense::kLessEqual;
        upper.rhs = M;
        upper.tag = row_tag::kUpperEdge;
        width.sense = RowSense::kGreaterEqual;
        width.rhs = 0.0;
        width.tag = row_tag::kWidthJumps;
        coupling.sense = RowSense::kGreaterEqual;
        coupling.rhs = -delta;
        coupling.tag = row_tag::kWidthLine;
        p.add_row(std::move(count));
        p.add_row(std::move(lower));
        p.add_row(std::move(upper));
        p.add_row(std::move(width));
        p.add_row(std::move(coupling));
      }
      p.add_row({{{xp, 1.0}, {xm, -1.0}}, {}, RowSense::kGreaterEqual, 0.0, row_tag::kWidthOrder});
    }
  }

  if (var.objective == VariableBoxes::Objective::kWidthSum) {
    idx.width_aux.assign(k, std::vector<int>(m));
    p.objective.maximize = var.maximize;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < m; ++j) {
        const int z = p.add_scalar("z_" + std::to_string(i) + "_" + std::to_string(j), VarKind::kNonneg);
        idx.width_aux[i][j] = z;
        const int xm = idx.x_minus[i][j], xp = idx.x_plus[i][j];
        p.add_row({{{z, 1.0}, {xp, -1.0}, {xm, 1.0}}, {}, RowSense::kGreaterEqual, 0.0, row_tag::kWidthAux});
        p.add_row({{{z, 1.0}, {xp, 1.0}, {xm, -1.0}}, {}, RowSense::kGreaterEqual, 0.0, row_tag::kWidthAux});
        if (var.maximize) {
          // z must equal the width when the sum is maximized.
          p.add_row({{{z, 1.0}, {xp, -1.0}, {xm, 1.0}}, {}, RowSense::kLessEqual, 0.0, row_tag::kWidthAux});
        }
        p.objective.scalar_terms.emplace_back(z, 1.0);
      }
    }
  } else {
    p.objective.maximize = var.maximize;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < m; ++j) {
        if (var.c_minus(i, j) != 0.0) p.objective.scalar_terms.emplace_back(idx.x_minus[i][j], var.c_minus(i, j));
        if (var.c_plus(i, j) != 0.0) p.objective.scalar_terms.emplace_back(idx.x_plus[i][j], var.c_plus(i, j));
      }
    }
  }
  for (const auto& br : var.box_rows) {
    LinearConstraint row;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < m; ++j) {
        if (br.coeff_minus(i, j) != 0.0) row.scalar_terms.emplace_back(idx.x_minus[i][j], br.coeff_minus(i, j));
        if (br.coeff_plus(i, j) != 0.0) row.scalar_terms.emplace_back(idx.x_plus[i][j], br.coeff_plus(i, j));
      }
    }
    row.sense = br.sense;
    row.rhs = br.rhs;
    row.tag = row_tag::kBoxSide;
    p.add_row(std::move(row));
  }
  return model;
}

GridBox to_grid(const BoxRegion& box, const Lattice& lattice) {
  GridBox g;
  g.empty = box.empty();
  for (int j = 0; j < box.dim(); ++j) {
    g.lo.push_back(lattice.nearest_index(box.lower(j)));
    g.hi.push_back(lattice.nearest_index(box.upper(j)));
  }
  return g;
}

BoxRegion from_grid(const GridBox& g, const Lattice& lattice) {
  const int m = lattice.dim();
  BoxRegion box{Vector::Zero(m), Vector::Zero(m)};
  if (g.empty) return box;
  for (int j = 0; j < m; ++j) {
    box.lower(j) = lattice.coord(g.lo[j]);
    box.upper(j) = lattice.coord(g.hi[j]);
  }
  return box;
}

DecodedBoxes decode_box(const AssembledModel& model, const Vector& values) {
  if (model.kind != AssembledModel::Kind::kVariableBoxes) throw std::invalid_argument("decode_box needs a Case-2 model");
  const auto& lattice = model.lattice;
  const int m = lattice.dim();
  DecodedBoxes out;
  for (std::size_t i = 0; i < model.var_index.btilde.size(); ++i) {
    std::vector<int> lo(m, lattice.per_axis()), hi(m, -1);
    std::size_t marked = 0;
    for (std::size_t t = 0; t < lattice.size(); ++t) {
      if (values(model.var_index.btilde[i][t]) < 0.5) continue;
      ++marked;
      const auto index = lattice.index_of(t);
      for (int j = 0; j < m; ++j) {
        lo[j] = std::min(lo[j], index[j]);
        hi[j] = std::max(hi[j], index[j]);
      }
    }
    if (marked == 0) {
      out.boxes.push_back({Vector::Zero(m), Vector::Zero(m)});
      out.empty.push_back(true);
      out.warnings.push_back("box " + std::to_string(i + 1) + " has no marked lattice point; reported as empty");
      continue;
    }
    std::size_t volume = 1;
    for (int j = 0; j < m; ++j) volume *= static_cast<std::size_t>(hi[j] - lo[j] + 1);
    if (volume != marked) {
      throw std::runtime_error("decode_box: marked points of box " + std::to_string(i + 1) + " do not form a box");
    }
    GridBox g{lo, hi, false};
    out.boxes.push_back(from_grid(g, lattice));
    out.empty.push_back(false);
  }
  return out;
}

namespace {

bool grid_contains(const GridBox& g, const std::vector<int>& index) {
  if (g.empty) return false;
  for (std::size_t j = 0; j < index.size(); ++j) {
    if (index[j] < g.lo[j] || index[j] > g.hi[j]) return false;
  }
  return true;
}

}  // namespace

Vector canonical_values(const AssembledModel& model, const std::vector<GridBox>& boxes) {
  const auto& idx = model.var_index;
  const auto& lattice = model.lattice;
  const int m = lattice.dim();
  Vector v = Vector::Zero(model.program.scalars.size());
  const auto coords = box_coords(model, boxes);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& g = boxes[i];
    for (std::size_t t = 0; t < lattice.size(); ++t) {
      const auto index = lattice.index_of(t);
      v(idx.btilde[i][t]) = grid_contains(g, index);
    }
    for (int j = 0; j < m; ++j) {
      v(idx.x_minus[i][j]) = coords.lower[i](j);
      v(idx.x_plus[i][j]) = coords.upper[i](j);
      for (std::size_t t = 0; t < lattice.size(); ++t) {
        const auto next = lattice.forward(t, j);
        const double diff = (next ? v(idx.btilde[i][*next]) : 0.0) - v(idx.btilde[i][t]);
        v(idx.delta_minus[i][j][t]) = diff > 0.5;
        v(idx.delta_plus[i][j][t]) = diff < -0.5;
      }
      if (!idx.width_aux.empty()) v(idx.width_aux[i][j]) = v(idx.x_plus[i][j]) - v(idx.x_minus[i][j]);
    }
  }
  return v;
}

BoundOverrides canonical_assignment(const AssembledModel& model, const std::vector<GridBox>& boxes) {
  const auto& p = model.program;
  const Vector v = canonical_values(model, boxes);
  BoundOverrides b;
  for (const auto& s : p.scalars) b.emplace_back(s.lower, s.upper);
  const auto& idx = model.var_index;
  for (std::size_t j = 0; j < p.scalars.size(); ++j) {
    if (p.scalars[j].kind == VarKind::kBinary) b[j] = {v(j), v(j)};
  }
  for (std::size_t i = 0; i < idx.x_minus.size(); ++i) {
    for (std::size_t j = 0; j < idx.x_minus[i].size(); ++j) {
      b[idx.x_minus[i][j]] = {v(idx.x_minus[i][j]), v(idx.x_minus[i][j])};
      b[idx.x_plus[i][j]] = {v(idx.x_plus[i][j]), v(idx.x_plus[i][j])};
    }
  }
  return b;
}

Vector box_contribution(const AssembledModel& model, const std::vector<GridBox>& boxes) {
  const auto& lattice = model.lattice;
  Vector c = Vector::Zero(lattice.size());
  for (std::size_t t = 0; t < lattice.size(); ++t) {
    const auto index = lattice.index_of(t);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (grid_contains(boxes[i], index)) c(t) += model.fn.heights(i);
    }
  }
  return c;
}

namespace {

// Objective contribution of one axis of box i.
double axis_objective(const AssembledModel& model, int i, int j, double lo, double hi) {
  const auto& var = model.fn.variable();
  if (var.objective == VariableBoxes::Objective::kWidthSum) return hi - lo;
  return var.c_minus(i, j) * lo + var.c_plus(i, j) * hi;
}

}  // namespace

namespace {

void resolve_coords(const AssembledModel& model, int i, const GridBox& g, Vector& lo, Vector& hi) {
  const auto& lattice = model.lattice;
  const int m = lattice.dim();
  const double M = lattice.edge();
  const bool maximize = model.fn.variable().maximize;
  lo.resize(m);
  hi.resize(m);
  for (int j = 0; j < m; ++j) {
    if (!g.empty) {
      lo(j) = lattice.coord(g.lo[j]);
      hi(j) = lattice.coord(g.hi[j]);
      continue;
    }
    const double vertices[3][2] = {{0.0, 0.0}, {0.0, M}, {M, M}};
    int best = 0;
    double best_value = axis_objective(model, i, j, 0.0, 0.0);
    for (int v = 1; v < 3; ++v) {
      const double value = axis_objective(model, i, j, vertices[v][0], vertices[v][1]);
      if (maximize ? value > best_value : value < best_value) {
        best = v;
        best_value = value;
      }
    }
    lo(j) = vertices[best][0];
    hi(j) = vertices[best][1];
  }
}

}  // namespace

BoxCoords box_coords(const AssembledModel& model, const std::vector<GridBox>& boxes) {
  BoxCoords c;
  c.lower.resize(boxes.size());
  c.upper.resize(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    resolve_coords(model, static_cast<int>(i), boxes[i], c.lower[i], c.upper[i]);
  }
  return c;
}

double box_objective_of(const AssembledModel& model, int i, const GridBox& box) {
  Vector lo, hi;
  resolve_coords(model, i, box, lo, hi);
  double obj = 0.0;
  for (int j = 0; j < model.lattice.dim(); ++j) obj += axis_objective(model, i, j, lo(j), hi(j));
  return obj;
}

double box_objective(const AssembledModel& model, const std::vector<GridBox>& boxes) {
  double obj = 0.0;
  for (std::size_t i = 0; i < boxes.size(); ++i) obj += box_objective_of(model, static_cast<int>(i), boxes[i]);
  return obj;
}

bool box_side_feasible(const AssembledModel& model, const std::vector<GridBox>& boxes, double tol) {
  const auto& var = model.fn.variable();
  const auto c = box_coords(model, boxes);
  for (const auto& row : var.box_rows) {
    double a = 0.0;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      for (int j = 0; j < model.lattice.dim(); ++j) {
        a += row.coeff_minus(i, j) * c.lower[i](j) + row.coeff_plus(i, j) * c.upper[i](j);
      }
    }
    if (row.sense == RowSense::kLessEqual && a > row.rhs + tol) return false;
    if (row.sense == RowSense::kGreaterEqual && a < row.rhs - tol) return false;
    if (row.sense == RowSense::kEqual && std::abs(a - row.rhs) > tol) return false;
  }
  return true;
}

void SlackProgram::set_contribution(const Vector& contribution) {
  for (std::size_t t = 0; t < sampled_rows.size(); ++t) program.rows[sampled_rows[t]].rhs = margin - contribution(t);
}

SlackProgram fixed_box_slack_program(const AssembledModel& model) {
  SlackProgram sp;
  sp.margin = model.margin;
  auto& p = sp.program;
  const auto& src = model.program;
  p.psd_vars = src.psd_vars;
  std::vector<int> remap(src.scalars.size(), -1);
  for (const int v : model.var_index.y) {
    remap[v] = p.add_scalar(src.scalars[v].name, VarKind::kNonneg);
    sp.y.push_back(remap[v]);
  }
  sp.theta = p.add_scalar("theta", VarKind::kFree, -kInf, 1.0);
  auto copy_row = [&](const LinearConstraint& row) {
    LinearConstraint out;
    out.psd_terms = row.psd_terms;
    for (const auto& [v, a] : row.scalar_terms) {
      if (remap[v] >= 0) out.scalar_terms.emplace_back(remap[v], a);
    }
    out.sense = row.sense;
    out.rhs = row.rhs;
    out.tag = row.tag;
    return out;
  };
  for (const auto& row : src.rows) {
    if (row.tag == row_tag::kThreshold || row.tag == row_tag::kTraceCap) p.add_row(copy_row(row));
  }
  for (const int r : model.sampled_rows) {
    auto row = copy_row(src.rows[r]);
    row.scalar_terms.emplace_back(sp.theta, -1.0);
    sp.sampled_rows.push_back(p.add_row(std::move(row)));
  }
  p.objective.maximize = true;
  p.objective.scalar_terms = {{sp.theta, 1.0}};
  return sp;
}

}  // namespace safedro
