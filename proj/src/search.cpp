#include "safedro/search.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <set>

namespace safedro {

const char* to_string(Incumbent::Status status) {
  switch (status) {
    case Incumbent::Status::kFeasible: return "feasible";
    case Incumbent::Status::kInfeasible: return "infeasible";
    case Incumbent::Status::kNoSolution: return "no-solution";
  }
  return "unknown";
}

const char* to_string(Incumbent::Proof proof) {
  switch (proof) {
    case Incumbent::Proof::kOptimal: return "optimal";
    case Incumbent::Proof::kGapLimit: return "gap-limit";
    case Incumbent::Proof::kResourceLimit: return "resource-limit";
  }
  return "unknown";
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string box_key(const std::vector<GridBox>& boxes) {
  std::string key;
  for (const auto& g : boxes) {
    if (g.empty) {
      key += "e;";
      continue;
    }
    for (std::size_t j = 0; j < g.lo.size(); ++j) key += std::to_string(g.lo[j]) + "-" + std::to_string(g.hi[j]) + ",";
    key += ";";
  }
  return key;
}

/// Inclusive prefix sums over the lattice for O(2^m) box sums.
class BoxSums {
 public:
  BoxSums(const Lattice& lattice, const Vector& weights) : dim_(lattice.dim()), side_(lattice.per_axis() + 1) {
    std::size_t total = 1;
    for (int j = 0; j < dim_; ++j) total *= side_;
    sums_ = Vector::Zero(static_cast<Eigen::Index>(total));
    for (std::size_t t = 0; t < lattice.size(); ++t) {
      auto index = lattice.index_of(t);
      for (auto& v : index) ++v;
      sums_(flat(index)) = weights(static_cast<Eigen::Index>(t));
    }
    for (int axis = 0; axis < dim_; ++axis) {
      std::size_t stride = 1;
      for (int j = dim_ - 1; j > axis; --j) stride *= side_;
      for (std::size_t f = 0; f < total; ++f) {
        if ((f / stride) % side_ != 0) sums_(f) += sums_(f - stride);
      }
    }
  }

  double sum(const GridBox& g) const {
    if (g.empty) return 0.0;
    double s = 0.0;
    std::vector<int> corner(dim_);
    for (int mask = 0; mask < (1 << dim_); ++mask) {
      int parity = 0;
      for (int j = 0; j < dim_; ++j) {
        if (mask & (1 << j)) {
          corner[j] = g.lo[j];
          ++parity;
        } else {
          corner[j] = g.hi[j] + 1;
        }
      }
      s += (parity % 2 ? -1.0 : 1.0) * sums_(flat(corner));
    }
    return s;
  }

 private:
  std::size_t flat(const std::vector<int>& index) const {
    std::size_t f = 0;
    for (int j = 0; j < dim_; ++j) f = f * side_ + static_cast<std::size_t>(index[j]);
    return f;
  }

  int dim_;
  std::size_t side_;
  Vector sums_;
};

/// Decides feasibility of box decisions through the slack program and keeps
/// supergradient cuts on its optimal value:
///   slack(beta') <= dual_objective + sum_t w_t (beta'_t - beta_t).
class BoxOracle {
 public:
  struct Result {
    bool feasible = false;
    bool solved = false;
    double slack = -kInf;
    DualVars duals;
  };

  BoxOracle(const AssembledModel& model, const SearchOptions& opts)
      : model_(model), opts_(opts), slack_(fixed_box_slack_program(model)) {}

  bool cut_rejects(const std::vector<GridBox>& boxes) const {
    for (const auto& cut : cuts_) {
      double bound = cut.offset;
      for (std::size_t i = 0; i < boxes.size(); ++i) bound += model_.fn.heights(i) * cut.sums.sum(boxes[i]);
      if (bound < -opts_.feas_tol - kCutSlack) return true;
    }
    return false;
  }

  const Result& check(const std::vector<GridBox>& boxes) {
    const auto key = box_key(boxes);
    if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
    const Vector contribution = box_contribution(model_, boxes);
    slack_.set_contribution(contribution);
    const auto sol = solve_sdp(slack_.program, opts_.solver);
    ++solves_;
    Result r;
    if (sol.status == SolveStatus::kOptimal) {
      r.solved = true;
      r.slack = sol.objective;
      r.feasible = sol.objective >= -opts_.feas_tol;
      r.duals.y1 = sol.psd_values[model_.var_index.y1];
      r.duals.y2 = sol.psd_values[model_.var_index.y2];
      r.duals.y.resize(static_cast<Eigen::Index>(slack_.y.size()));
      for (std::size_t c = 0; c < slack_.y.size(); ++c) r.duals.y(c) = sol.scalar_values(slack_.y[c]);
      add_cut(sol, contribution);
    } else if (sol.status == SolveStatus::kNumericalFailure) {
      ++failures_;
    }
    return cache_.emplace(key, std::move(r)).first->second;
  }

  long solves() const { return solves_; }
  long failures() const { return failures_; }

 private:
  static constexpr double kCutSlack = 1e-7;

  struct Cut {
    double offset;
    BoxSums sums;
  };

  void add_cut(const SdpSolution& sol, const Vector& contribution) {
    Vector w(static_cast<Eigen::Index>(slack_.sampled_rows.size()));
    for (std::size_t t = 0; t < slack_.sampled_rows.size(); ++t) {
      w(t) = std::max(0.0, sol.row_duals(slack_.sampled_rows[t]));
    }
    const double offset = sol.dual_objective - w.dot(contribution);
    cuts_.push_back({offset, BoxSums(model_.lattice, w)});
  }

  const AssembledModel& model_;
  const SearchOptions& opts_;
  SlackProgram slack_;
  std::map<std::string, Result> cache_;
  std::vector<Cut> cuts_;
  long solves_ = 0;
  long failures_ = 0;
};

void fill_incumbent(Incumbent& inc, const AssembledModel& model, const std::vector<GridBox>& boxes, double objective,
                    const BoxOracle::Result& r) {
  inc.status = Incumbent::Status::kFeasible;
  inc.objective = objective;
  inc.heights = model.fn.heights;
  inc.grid = boxes;
  inc.boxes.clear();
  inc.empty.clear();
  for (const auto& g : boxes) {
    inc.boxes.push_back(from_grid(g, model.lattice));
    inc.empty.push_back(g.empty);
  }
  inc.dual_vars = r.duals;
  inc.min_slack = r.slack;
}

void require_case2(const AssembledModel& model) {
  if (model.kind != AssembledModel::Kind::kVariableBoxes) {
    throw std::invalid_argument("box search needs a Case-2 model");
  }
}

std::vector<GridBox> full_boxes(const AssembledModel& model) {
  const int m = model.lattice.dim();
  const int last = model.lattice.per_axis() - 1;
  return std::vector<GridBox>(model.fn.k(), GridBox{std::vector<int>(m, 0), std::vector<int>(m, last), false});
}

// All candidate boxes for one box slot, sorted by objective then index order.
std::vector<std::pair<double, GridBox>> sorted_candidates(const AssembledModel& model, int i, double sign) {
  const auto& lattice = model.lattice;
  const int m = lattice.dim(), n = lattice.per_axis();
  std::vector<std::pair<int, int>> intervals;
  for (int lo = 0; lo < n; ++lo) {
    for (int hi = lo; hi < n; ++hi) intervals.emplace_back(lo, hi);
  }
  std::vector<std::pair<double, GridBox>> out;
  GridBox empty{std::vector<int>(m, 0), std::vector<int>(m, 0), true};
  out.emplace_back(sign * box_objective_of(model, i, empty), empty);
  std::vector<std::size_t> pick(m, 0);
  while (true) {
    GridBox g{std::vector<int>(m), std::vector<int>(m), false};
    for (int j = 0; j < m; ++j) {
      g.lo[j] = intervals[pick[j]].first;
      g.hi[j] = intervals[pick[j]].second;
    }
    out.emplace_back(sign * box_objective_of(model, i, g), g);
    int j = m - 1;
    while (j >= 0 && ++pick[j] == intervals.size()) pick[j--] = 0;
    if (j < 0) break;
  }
  // Objectives are sums of lattice coordinates; round before ordering so that
  // ties are decided by index order, not by floating-point noise.
  auto rounded = [](double v) { return std::round(v * 1e9) / 1e9; };
  std::stable_sort(out.begin(), out.end(),
                   [&](const auto& a, const auto& b) { return rounded(a.first) < rounded(b.first); });
  return out;
}

}  // namespace

Incumbent enumerate_boxes(const AssembledModel& model, const SearchOptions& opts) {
  require_case2(model);
  const int k = model.fn.k();
  if (k > 2 || model.lattice.dim() > 2 || model.lattice.per_axis() > 26) {
    throw InstanceTooLarge("enumerate_boxes supports k <= 2, m <= 2 and at most 26 points per axis");
  }
  const auto start = Clock::now();
  const double sign = model.fn.variable().maximize ? -1.0 : 1.0;
  std::vector<std::vector<std::pair<double, GridBox>>> lists;
  for (int i = 0; i < k; ++i) lists.push_back(sorted_candidates(model, i, sign));

  BoxOracle oracle(model, opts);
  Incumbent inc;
  inc.status = Incumbent::Status::kInfeasible;
  inc.proof = Incumbent::Proof::kOptimal;

  // Combinations in nondecreasing cost: a heap over index tuples.
  using Tuple = std::vector<std::size_t>;
  auto cost = [&](const Tuple& tu) {
    double c = 0.0;
    for (int i = 0; i < k; ++i) c += lists[i][tu[i]].first;
    return std::round(c * 1e9) / 1e9;
  };
  auto later = [&](const Tuple& a, const Tuple& b) {
    const double ca = cost(a), cb = cost(b);
    if (ca != cb) return ca > cb;
    return a > b;
  };
  std::priority_queue<Tuple, std::vector<Tuple>, decltype(later)> heap(later);
  std::set<Tuple> seen;
  heap.push(Tuple(k, 0));
  seen.insert(Tuple(k, 0));
  long visited = 0, pruned = 0;
  while (!heap.empty()) {
    if (seconds_since(start) > opts.time_limit) {
      inc.status = Incumbent::Status::kNoSolution;
      inc.proof = Incumbent::Proof::kResourceLimit;
      break;
    }
    const Tuple tu = heap.top();
    heap.pop();
    for (int i = 0; i < k; ++i) {
      if (tu[i] + 1 >= lists[i].size()) continue;
      Tuple next = tu;
      ++next[i];
      if (seen.insert(next).second) heap.push(next);
    }
    ++visited;
    std::vector<GridBox> boxes;
    for (int i = 0; i < k; ++i) boxes.push_back(lists[i][tu[i]].second);
    if (!box_side_feasible(model, boxes)) continue;
    if (oracle.cut_rejects(boxes)) {
      ++pruned;
      continue;
    }
    const auto& r = oracle.check(boxes);
    if (opts.log && oracle.solves() % opts.log_every == 0) {
      *opts.log << "event=enumerate visited=" << visited << " cut_pruned=" << pruned << " sdp_solves=" << oracle.solves()
                << " objective=" << sign * cost(tu) << " time=" << seconds_since(start) << "\n";
    }
    if (!r.feasible) continue;
    fill_incumbent(inc, model, boxes, box_objective(model, boxes), r);
    inc.proof = Incumbent::Proof::kOptimal;
    break;
  }
  inc.best_bound = inc.status == Incumbent::Status::kFeasible ? inc.objective : sign * kInf;
  inc.node_count = visited;
  inc.sdp_solves = oracle.solves();
  inc.wall_time = seconds_since(start);
  if (opts.log) {
    *opts.log << "event=enumerate_done status=" << to_string(inc.status) << " proof=" << to_string(inc.proof)
              << " objective=" << inc.objective << " visited=" << visited << " cut_pruned=" << pruned
              << " sdp_solves=" << oracle.solves() << " numerical_failures=" << oracle.failures()
              << " time=" << inc.wall_time << "\n";
  }
  return inc;
}

Incumbent solve_case1(const AssembledModel& model, const SolverOptions& opts) {
  if (model.kind != AssembledModel::Kind::kFixedBoxes) throw std::invalid_argument("solve_case1 needs a Case-1 model");
  const auto start = Clock::now();
  const SdpSolution sol = solve_sdp(model.program, opts);
  Incumbent inc;
  inc.sdp_solves = 1;
  inc.node_count = 1;
  inc.wall_time = seconds_since(start);
  if (sol.status == SolveStatus::kInfeasible) {
    inc.status = Incumbent::Status::kInfeasible;
    inc.proof = Incumbent::Proof::kOptimal;
    return inc;
  }
  if (sol.status != SolveStatus::kOptimal) return inc;
  const auto& idx = model.var_index;
  inc.status = Incumbent::Status::kFeasible;
  inc.proof = Incumbent::Proof::kOptimal;
  inc.objective = sol.objective;
  inc.best_bound = sol.objective;
  inc.boxes = model.fn.fixed().boxes;
  inc.empty.assign(inc.boxes.size(), false);
  inc.heights = model.fn.heights;
  for (std::size_t i = 0; i < idx.heights.size(); ++i) inc.heights(i) = sol.scalar_values(idx.heights[i]);
  inc.dual_vars.y1 = sol.psd_values[idx.y1];
  inc.dual_vars.y2 = sol.psd_values[idx.y2];
  inc.dual_vars.y.resize(static_cast<Eigen::Index>(idx.y.size()));
  for (std::size_t c = 0; c < idx.y.size(); ++c) inc.dual_vars.y(c) = sol.scalar_values(idx.y[c]);
  double slack = kInf;
  for (const int r : model.sampled_rows) {
    const auto& row = model.program.rows[r];
    slack = std::min(slack, row_activity(row, sol.scalar_values, sol.psd_values) - row.rhs);
  }
  inc.min_slack = slack;
  return inc;
}

SdpSolution root_relaxation(const AssembledModel& model, const SolverOptions& opts) {
  return solve_sdp(model.program, opts, nullptr, true);
}

namespace {

/// Fixing state of the b-tilde binaries: -1 free, 0, 1.
using Fixing = std::vector<std::vector<signed char>>;

struct Node {
  Fixing fix;
  double bound;
  long id;
  int depth;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  }
};

class BranchAndBound {
 public:
  BranchAndBound(const AssembledModel& model, const SearchOptions& opts)
      : model_(model), opts_(opts), lattice_(model.lattice), oracle_(model, opts),
        sign_(model.fn.variable().maximize ? -1.0 : 1.0) {}

  Incumbent run() {
    start_ = Clock::now();
    const int k = model_.fn.k();
    Fixing root(k, std::vector<signed char>(lattice_.size(), -1));
    try_boxes(full_boxes(model_));
    std::vector<GridBox> none(k, GridBox{std::vector<int>(lattice_.dim(), 0), std::vector<int>(lattice_.dim(), 0), true});
    try_boxes(none);

    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    open.push({root, -kInf, next_id_++, 0});
    bool limit_hit = false;
    bool root_infeasible = false;
    while (!open.empty()) {
      Node node = open.top();
      open.pop();
      // Plunge: keep following one child until the path is pruned.
      std::optional<Node> current = std::move(node);
      while (current) {
        if (node_count_ >= opts_.node_limit || seconds_since(start_) > opts_.time_limit) {
          limit_hit = true;
          open.push(std::move(*current));
          break;
        }
        if (current->bound >= best_cost_ - opts_.gap_tol) break;
        auto [children, infeasible_root] = process(*current);
        if (current->depth == 0 && infeasible_root) root_infeasible = true;
        if (children.empty()) {
          current.reset();
        } else {
          for (std::size_t c = 1; c < children.size(); ++c) open.push(std::move(children[c]));
          current = std::move(children[0]);
        }
        if (opts_.log && node_count_ % opts_.log_every == 0) log_progress(open);
      }
      if (limit_hit) break;
    }

    Incumbent inc = incumbent_;
    double bound = best_cost_;
    while (!open.empty()) {
      bound = std::min(bound, open.top().bound);
      open.pop();
    }
    inc.best_bound = sign_ * bound;
    if (inc.status == Incumbent::Status::kFeasible) {
      inc.proof = limit_hit ? Incumbent::Proof::kResourceLimit
                            : (opts_.gap_tol > 1e-6 ? Incumbent::Proof::kGapLimit : Incumbent::Proof::kOptimal);
    } else if (!limit_hit || root_infeasible) {
      inc.status = Incumbent::Status::kInfeasible;
      inc.proof = Incumbent::Proof::kOptimal;
    } else {
      inc.status = Incumbent::Status::kNoSolution;
      inc.proof = Incumbent::Proof::kResourceLimit;
    }
    inc.node_count = node_count_;
    inc.sdp_solves = relaxation_solves_ + oracle_.solves();
    inc.wall_time = seconds_since(start_);
    if (opts_.log) {
      *opts_.log << "event=bnb_done status=" << to_string(inc.status) << " proof=" << to_string(inc.proof)
                 << " objective=" << inc.objective << " bound=" << inc.best_bound << " nodes=" << node_count_
                 << " sdp_solves=" << inc.sdp_solves << " numerical_failures=" << failures_ + oracle_.failures()
                 << " time=" << inc.wall_time << "\n";
    }
    return inc;
  }

 private:
  void log_progress(const std::priority_queue<Node, std::vector<Node>, NodeOrder>& open) {
    const double bound = open.empty() ? best_cost_ : std::min(open.top().bound, best_cost_);
    const double gap = best_cost_ - bound;
    *opts_.log << "event=node nodes=" << node_count_ << " open=" << open.size() << " bound=" << sign_ * bound
               << " incumbent=" << (std::isfinite(best_cost_) ? sign_ * best_cost_ : kInf) << " gap=" << gap
               << " time=" << seconds_since(start_) << "\n";
  }

  // Tries a box decision as incumbent.
  void try_boxes(const std::vector<GridBox>& boxes) {
    const double cost = sign_ * box_objective(model_, boxes);
    if (cost >= best_cost_ - 1e-12) return;
    if (!box_side_feasible(model_, boxes)) return;
    if (oracle_.cut_rejects(boxes)) return;
    const auto& r = oracle_.check(boxes);
    if (!r.feasible) return;
    best_cost_ = cost;
    fill_incumbent(incumbent_, model_, boxes, sign_ * cost, r);
  }

  struct BoxState {
    bool has_ones = false;
    std::vector<int> lo, hi;
    std::vector<int> outer_lo, outer_hi;
  };

  bool inside(const std::vector<int>& index, const std::vector<int>& lo, const std::vector<int>& hi) const {
    for (std::size_t j = 0; j < index.size(); ++j) {
      if (index[j] < lo[j] || index[j] > hi[j]) return false;
    }
    return true;
  }

  // Box hull propagation. Returns false if the fixing admits no box.
  bool propagate(std::vector<signed char>& fix, BoxState& st) const {
    const int m = lattice_.dim();
    const int n = lattice_.per_axis();
    st.lo.assign(m, n);
    st.hi.assign(m, -1);
    std::vector<std::vector<int>> zeros;
    for (std::size_t t = 0; t < fix.size(); ++t) {
      if (fix[t] == 0) zeros.push_back(lattice_.index_of(t));
      if (fix[t] != 1) continue;
      st.has_ones = true;
      const auto index = lattice_.index_of(t);
      for (int j = 0; j < m; ++j) {
        st.lo[j] = std::min(st.lo[j], index[j]);
        st.hi[j] = std::max(st.hi[j], index[j]);
      }
    }
    if (!st.has_ones) return true;
    for (const auto& z : zeros) {
      if (inside(z, st.lo, st.hi)) return false;
    }
    std::vector<int> lo(m), hi(m);
    for (std::size_t t = 0; t < fix.size(); ++t) {
      if (fix[t] != -1) continue;
      const auto index = lattice_.index_of(t);
      if (inside(index, st.lo, st.hi)) {
        fix[t] = 1;
        continue;
      }
      for (int j = 0; j < m; ++j) {
        lo[j] = std::min(st.lo[j], index[j]);
        hi[j] = std::max(st.hi[j], index[j]);
      }
      for (const auto& z : zeros) {
        if (inside(z, lo, hi)) {
          fix[t] = 0;
          break;
        }
      }
    }
    // Furthest each edge can move before the box would cover a zero.
    st.outer_lo = st.lo;
    st.outer_hi = st.hi;
    for (int j = 0; j < m; ++j) {
      auto slab_free = [&](int level) {
        lo = st.lo;
        hi = st.hi;
        lo[j] = hi[j] = level;
        for (const auto& z : zeros) {
          if (inside(z, lo, hi)) return false;
        }
        return true;
      };
      while (st.outer_lo[j] > 0 && slab_free(st.outer_lo[j] - 1)) --st.outer_lo[j];
      while (st.outer_hi[j] < n - 1 && slab_free(st.outer_hi[j] + 1)) ++st.outer_hi[j];
    }
    return true;
  }

  // Returns the children to explore (first is the plunge child) and whether
  // the node's relaxation was infeasible.
  std::pair<std::vector<Node>, bool> process(Node& node) {
    ++node_count_;
    const int k = model_.fn.k(), m = lattice_.dim();
    const auto& idx = model_.var_index;
    const auto& prog = model_.program;
    BoundOverrides bounds;
    for (const auto& s : prog.scalars) {
      bounds.emplace_back(s.kind == VarKind::kBinary ? 0.0 : s.lower, s.kind == VarKind::kBinary ? 1.0 : s.upper);
    }
    std::vector<BoxState> states(k);
    for (int i = 0; i < k; ++i) {
      if (!propagate(node.fix[i], states[i])) return {{}, false};
      const auto& f = node.fix[i];
      for (std::size_t t = 0; t < f.size(); ++t) {
        if (f[t] >= 0) bounds[idx.btilde[i][t]] = {double(f[t]), double(f[t])};
      }
      for (int j = 0; j < m; ++j) {
        for (std::size_t t = 0; t < f.size(); ++t) {
          const auto next = lattice_.forward(t, j);
          const int here = f[t];
          const int there = next ? f[*next] : 0;
          if (here < 0 || there < 0) continue;
          const double dm = there - here > 0 ? 1.0 : 0.0;
          const double dp = there - here < 0 ? 1.0 : 0.0;
          bounds[idx.delta_minus[i][j][t]] = {dm, dm};
          bounds[idx.delta_plus[i][j][t]] = {dp, dp};
        }
        if (states[i].has_ones) {
          const auto& st = states[i];
          bounds[idx.x_minus[i][j]] = {lattice_.coord(st.outer_lo[j]), lattice_.coord(st.lo[j])};
          bounds[idx.x_plus[i][j]] = {lattice_.coord(st.hi[j]), lattice_.coord(st.outer_hi[j])};
        }
      }
    }

    const auto sol = solve_sdp(prog, opts_.solver, &bounds, true);
    ++relaxation_solves_;
    if (sol.status == SolveStatus::kInfeasible) return {{}, true};
    double bound = node.bound;
    Vector values;
    if (sol.status == SolveStatus::kOptimal) {
      bound = std::max(bound, std::min(sign_ * sol.objective, sign_ * sol.dual_objective));
      values = sol.scalar_values;
    } else {
      ++failures_;
      if (opts_.log) {
        *opts_.log << "event=relaxation_failure node=" << node.id << " status=" << to_string(sol.status)
                   << " iterations=" << sol.iterations << "\n";
      }
    }
    if (bound >= best_cost_ - opts_.gap_tol) return {{}, false};

    // Rounding heuristics: hull of near-one values and of values >= 1/2.
    if (values.size() > 0) {
      for (const double cutoff : {1.0 - 1e-6, 0.5}) try_boxes(round_boxes(node.fix, states, values, cutoff));
      if (bound >= best_cost_ - opts_.gap_tol) return {{}, false};
    }

    const auto pick = choose_branch(node.fix, values);
    if (!pick) {
      // All binaries fixed: the relaxation is the restricted problem itself.
      try_boxes(round_boxes(node.fix, states, values, 0.5));
      return {{}, false};
    }
    const auto [box, t] = *pick;
    const double v = values.size() > 0 ? values(idx.btilde[box][t]) : 1.0;
    std::vector<Node> children;
    for (const signed char value : v >= 0.5 ? std::array<signed char, 2>{1, 0} : std::array<signed char, 2>{0, 1}) {
      Node child{node.fix, bound, next_id_++, node.depth + 1};
      child.fix[box][t] = value;
      children.push_back(std::move(child));
    }
    return {children, false};
  }

  std::vector<GridBox> round_boxes(const Fixing& fix, const std::vector<BoxState>& states, const Vector& values,
                                   double cutoff) const {
    const int k = model_.fn.k(), m = lattice_.dim(), n = lattice_.per_axis();
    std::vector<GridBox> boxes;
    for (int i = 0; i < k; ++i) {
      GridBox g{std::vector<int>(m, n), std::vector<int>(m, -1), true};
      for (std::size_t t = 0; t < lattice_.size(); ++t) {
        const bool one = fix[i][t] == 1 || (fix[i][t] == -1 && values.size() > 0 &&
                                            values(model_.var_index.btilde[i][t]) >= cutoff);
        if (!one) continue;
        g.empty = false;
        const auto index = lattice_.index_of(t);
        for (int j = 0; j < m; ++j) {
          g.lo[j] = std::min(g.lo[j], index[j]);
          g.hi[j] = std::max(g.hi[j], index[j]);
        }
      }
      if (g.empty) {
        g.lo.assign(m, 0);
        g.hi.assign(m, 0);
      } else if (states[i].has_ones) {
        // Keep the hull inside the region that avoids zero fixings.
        for (int j = 0; j < m; ++j) {
          g.lo[j] = std::max(g.lo[j], states[i].outer_lo[j]);
          g.hi[j] = std::min(g.hi[j], states[i].outer_hi[j]);
        }
      }
      boxes.push_back(g);
    }
    return boxes;
  }

  std::optional<std::pair<int, std::size_t>> choose_branch(const Fixing& fix, const Vector& values) const {
    const int k = model_.fn.k();
    const auto& idx = model_.var_index;
    auto frac = [&](int i, std::size_t t) {
      if (values.size() == 0) return 0.0;
      const double v = values(idx.btilde[i][t]);
      return std::min(v, 1.0 - v);
    };
    std::optional<std::pair<int, std::size_t>> best;
    double best_frac = -1.0;
    auto consider = [&](int i, std::size_t t) {
      if (fix[i][t] != -1) return;
      const double f = frac(i, t);
      if (f > best_frac) {
        best_frac = f;
        best = {i, t};
      }
    };
    if (opts_.branching == SearchOptions::Branching::kMostFractional) {
      for (int i = 0; i < k; ++i) {
        for (std::size_t t = 0; t < lattice_.size(); ++t) consider(i, t);
      }
      return best;
    }
    // Line-guided: the line with the largest fractional mass, then its most
    // fractional point.
    double best_mass = -1.0;
    std::optional<std::pair<int, std::vector<std::size_t>>> best_line;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < lattice_.dim(); ++j) {
        for (const std::size_t start : lattice_.line_starts(j)) {
          auto line = lattice_.line(start, j);
          double mass = 0.0;
          bool any_free = false;
          for (const std::size_t t : line) {
            if (fix[i][t] != -1) continue;
            any_free = true;
            mass += frac(i, t);
          }
          if (any_free && mass > best_mass) {
            best_mass = mass;
            best_line = {i, std::move(line)};
          }
        }
      }
    }
    if (!best_line) return std::nullopt;
    for (const std::size_t t : best_line->second) consider(best_line->first, t);
    return best;
  }

  const AssembledModel& model_;
  const SearchOptions& opts_;
  const Lattice& lattice_;
  BoxOracle oracle_;
  double sign_;
  Clock::time_point start_;
  Incumbent incumbent_;
  double best_cost_ = kInf;
  long node_count_ = 0;
  long next_id_ = 0;
  long relaxation_solves_ = 0;
  long failures_ = 0;
};

}  // namespace

Incumbent solve_bnb(const AssembledModel& model, const SearchOptions& opts) {
  require_case2(model);
  return BranchAndBound(model, opts).run();
}

Incumbent solve_case2(const AssembledModel& model, const SearchOptions& opts, std::vector<std::string>* warnings) {
  using Mode = SearchOptions::Mode;
  if (opts.mode == Mode::kEnumerate) return enumerate_boxes(model, opts);
  Incumbent bnb = solve_bnb(model, opts);
  if (opts.mode == Mode::kBnb) return bnb;
  try {
    const Incumbent en = enumerate_boxes(model, opts);
    const bool both_optimal = bnb.proof == Incumbent::Proof::kOptimal && en.proof == Incumbent::Proof::kOptimal;
    if (both_optimal && (bnb.status != en.status || (bnb.status == Incumbent::Status::kFeasible &&
                                                     std::abs(bnb.objective - en.objective) > 1e-6))) {
      if (warnings) {
        warnings->push_back("branch-and-bound and enumeration disagree: " + std::to_string(bnb.objective) + " vs " +
                            std::to_string(en.objective));
      }
    }
  } catch (const InstanceTooLarge& e) {
    if (warnings) warnings->push_back(std::string("enumeration skipped: ") + e.what());
  }
  return bnb;
}

std::pair<Vector, std::vector<Matrix>> incumbent_point(const AssembledModel& model, const Incumbent& inc) {
  Vector v = canonical_values(model, inc.grid);
  for (std::size_t c = 0; c < model.var_index.y.size(); ++c) v(model.var_index.y[c]) = inc.dual_vars.y(c);
  std::vector<Matrix> psd(2);
  psd[model.var_index.y1] = inc.dual_vars.y1;
  psd[model.var_index.y2] = inc.dual_vars.y2;
  return {v, psd};
}

}  // namespace safedro
