#include "safedro/certify.hpp"

#include <cmath>
#include <random>

namespace safedro {

BoxRegion empty_box(int dim) { return {Vector::Ones(dim), Vector::Zero(dim)}; }

Decision decision_of(const Incumbent& inc) {
  Decision d;
  d.heights = inc.heights;
  for (std::size_t i = 0; i < inc.boxes.size(); ++i) {
    const bool empty = i < inc.empty.size() && inc.empty[i];
    d.boxes.push_back(empty ? empty_box(inc.boxes[i].dim()) : inc.boxes[i]);
  }
  return d;
}

double decision_value(const Decision& decision, const Vector& t) {
  double v = 0.0;
  for (std::size_t i = 0; i < decision.boxes.size(); ++i) {
    if (indicator_box(t, decision.boxes[i])) v += decision.heights(static_cast<Eigen::Index>(i));
  }
  return v;
}

OracleResult adversary_oracle(const Decision& decision, const AmbiguitySpec& spec, const Lattice& lattice,
                              const SolverOptions& opts) {
  OracleResult out;
  // Whole-domain confidence rows reduce to constants under the unit mass.
  for (const auto& cs : spec.confidence_sets) {
    if (!std::holds_alternative<WholeDomain>(cs.region)) continue;
    const bool ok = cs.eps > 0 ? 1.0 >= cs.eps - 1e-12 : 1.0 <= -cs.eps + 1e-12;
    if (!ok) {
      out.status = SolveStatus::kInfeasible;
      return out;
    }
  }

  const int m = spec.dim;
  ConicProgram p;
  LinearConstraint mass{{}, {}, RowSense::kEqual, 1.0, "mass"};
  LmiConstraint first{{}, Matrix::Zero(m + 1, m + 1), "first_moment"};
  LmiConstraint second{{}, spec.eps_sigma * spec.cov, "second_moment"};
  std::vector<LinearConstraint> confidence;
  std::vector<int> confidence_of;
  for (std::size_t c = 0; c < spec.confidence_sets.size(); ++c) {
    const auto& cs = spec.confidence_sets[c];
    if (std::holds_alternative<WholeDomain>(cs.region)) continue;
    confidence.push_back({{}, {}, cs.eps > 0 ? RowSense::kGreaterEqual : RowSense::kLessEqual, std::abs(cs.eps),
                          "confidence"});
    confidence_of.push_back(static_cast<int>(c));
  }
  for (std::size_t j = 0; j < lattice.size(); ++j) {
    const Vector s = lattice.point(j);
    const int w = p.add_scalar("w" + std::to_string(j), VarKind::kNonneg, 0.0);
    mass.scalar_terms.emplace_back(w, 1.0);
    first.terms.emplace_back(w, first_moment_block(s, spec));
    second.terms.emplace_back(w, -second_moment_outer(s, spec));
    for (std::size_t r = 0; r < confidence.size(); ++r) {
      if (region_indicator(s, spec.confidence_sets[confidence_of[r]].region)) {
        confidence[r].scalar_terms.emplace_back(w, 1.0);
      }
    }
    const double v = decision_value(decision, s);
    if (v != 0.0) p.objective.scalar_terms.emplace_back(w, v);
  }
  p.add_row(std::move(mass));
  for (auto& row : confidence) p.add_row(std::move(row));
  p.add_lmi(std::move(first));
  p.add_lmi(std::move(second));

  const SdpSolution sol = solve_sdp(p, opts);
  out.status = sol.status;
  if (sol.status == SolveStatus::kOptimal) {
    out.value = sol.objective;
    out.weights = sol.scalar_values;
  }
  return out;
}

double dual_objective(const DualVars& duals, const AmbiguitySpec& spec) {
  double v = -spec.eps_sigma * spec.cov.cwiseProduct(duals.y2).sum();
  for (std::size_t c = 0; c < spec.confidence_sets.size(); ++c) {
    v += spec.confidence_sets[c].eps * duals.y(static_cast<Eigen::Index>(c));
  }
  return v;
}

double weak_duality_gap(double dual_objective, double oracle_value) { return oracle_value - dual_objective; }

double fc_value(const Vector& t, const Decision& decision, const DualVars& duals, const AmbiguitySpec& spec,
                double delta) {
  double v = poly_part(t, duals.y1, duals.y2, spec);
  for (std::size_t i = 0; i < decision.boxes.size(); ++i) {
    v += decision.heights(static_cast<Eigen::Index>(i)) * smoothed_indicator(t, decision.boxes[i], delta);
  }
  for (std::size_t c = 0; c < spec.confidence_sets.size(); ++c) {
    const auto& cs = spec.confidence_sets[c];
    const double inside = std::holds_alternative<WholeDomain>(cs.region)
                              ? 1.0
                              : smoothed_indicator(t, std::get<BoxRegion>(cs.region), delta);
    v -= sign_of(cs.eps) * inside * duals.y(static_cast<Eigen::Index>(c));
  }
  return v;
}

FcSample sample_fc(const Decision& decision, const DualVars& duals, const AmbiguitySpec& spec, double delta,
                   int n_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, spec.domain_edge);
  FcSample out;
  Vector t(spec.dim);
  for (int s = 0; s < n_samples; ++s) {
    for (int j = 0; j < spec.dim; ++j) t(j) = coord(rng);
    const double v = fc_value(t, decision, duals, spec, delta);
    if (v < out.min) {
      out.min = v;
      out.argmin = t;
    }
  }
  return out;
}

const char* to_string(Certificate::Verdict verdict) {
  switch (verdict) {
    case Certificate::Verdict::kCertified: return "certified";
    case Certificate::Verdict::kFalsified: return "falsified";
    case Certificate::Verdict::kInconclusive: return "inconclusive";
  }
  return "unknown";
}

Certificate certify(const Decision& decision, const DualVars& duals, const AmbiguitySpec& spec, double delta,
                    const CertifyOptions& opts) {
  Certificate cert;
  cert.fine_delta = opts.fine_delta > 0.0 ? opts.fine_delta : 0.5 * delta;
  cert.samples = opts.samples;
  const bool fine_enough = cert.fine_delta <= 0.5 * delta * (1.0 + 1e-9);
  if (!fine_enough) {
    cert.warnings.push_back("oracle lattice step " + std::to_string(cert.fine_delta) +
                            " is coarser than half the assembly step " + std::to_string(delta));
  }
  const Lattice fine = lattice_points(spec.domain_edge, spec.dim, cert.fine_delta);
  const OracleResult oracle = adversary_oracle(decision, spec, fine, opts.solver);
  const FcSample fc = sample_fc(decision, duals, spec, delta, opts.samples, opts.seed);
  cert.fc_min_sampled = fc.min;
  cert.fc_argmin = fc.argmin;

  const bool fc_ok = fc.min >= -opts.tol;
  if (oracle.status != SolveStatus::kOptimal) {
    cert.warnings.push_back(std::string("oracle solve ended with status ") + to_string(oracle.status));
    cert.verdict = fc_ok ? Certificate::Verdict::kInconclusive : Certificate::Verdict::kFalsified;
    return cert;
  }
  cert.worst_case_expectation = oracle.value;
  cert.duality_gap = weak_duality_gap(dual_objective(duals, spec), oracle.value);
  if (cert.duality_gap < -opts.tol) cert.warnings.push_back("negative duality gap");
  if (oracle.value < spec.threshold - opts.tol || !fc_ok) {
    cert.verdict = Certificate::Verdict::kFalsified;
  } else {
    cert.verdict = fine_enough ? Certificate::Verdict::kCertified : Certificate::Verdict::kInconclusive;
  }
  return cert;
}

}  // namespace safedro
