#include "safedro/pipeline.hpp"

#include "safedro/assemble.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace safedro {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json matrix_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vector_json(m.row(r).transpose()));
  return a;
}

Vector vector_from(const json& a) {
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a.at(i).get<double>();
  return v;
}

Matrix matrix_from(const json& a) {
  if (a.empty()) return {};
  Matrix m(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(a.at(0).size()));
  for (std::size_t r = 0; r < a.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = vector_from(a.at(r)).transpose();
  return m;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or(const json& j, const char* key, double fallback) {
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : it->get<double>();
}

SolveRecord::Outcome outcome_from(const std::string& s) {
  for (const auto o : {SolveRecord::Outcome::kSolved, SolveRecord::Outcome::kInfeasible,
                       SolveRecord::Outcome::kNoSolution, SolveRecord::Outcome::kInvalid}) {
    if (s == to_string(o)) return o;
  }
  throw ConfigError(0, "malformed record: unknown outcome '" + s + "'");
}

Certificate::Verdict verdict_from(const std::string& s) {
  for (const auto v : {Certificate::Verdict::kCertified, Certificate::Verdict::kFalsified,
                       Certificate::Verdict::kInconclusive}) {
    if (s == to_string(v)) return v;
  }
  throw ConfigError(0, "malformed record: unknown verdict '" + s + "'");
}

}  // namespace

const char* to_string(SolveRecord::Outcome outcome) {
  switch (outcome) {
    case SolveRecord::Outcome::kSolved: return "solved";
    case SolveRecord::Outcome::kInfeasible: return "infeasible";
    case SolveRecord::Outcome::kNoSolution: return "no_solution";
    case SolveRecord::Outcome::kInvalid: return "invalid";
  }
  return "unknown";
}

ValidationReport validate_config(const RunConfig& cfg) {
  ValidationReport merged;
  auto merge = [&merged](const ValidationReport::Item& item) {
    for (auto& old : merged.items) {
      if (old.check != item.check) continue;
      if (old.passed && !item.passed) old = item;
      return;
    }
    merged.items.push_back(item);
  };
  for (const double delta : cfg.deltas) {
    const std::string at = " (delta=" + fmt(delta) + ")";
    Lattice lattice;
    try {
      lattice = lattice_points(cfg.spec.domain_edge, std::max(cfg.spec.dim, 1), delta);
    } catch (const std::invalid_argument& e) {
      merge({"lattice", false, e.what() + at});
      continue;
    }
    merge({"lattice", true, ""});
    for (auto item : validate_spec(cfg.spec, cfg.fn, lattice, cfg.tol).items) {
      if (!item.passed) item.message += at;
      merge(item);
    }
  }
  return merged;
}

SolveRecord solve_at(const RunConfig& cfg, double delta, std::ostream* log, bool certify) {
  SolveRecord rec;
  rec.delta = delta;
  rec.fixed_boxes = cfg.fn.is_fixed();
  const auto start = Clock::now();
  auto finish = [&]() {
    rec.solve_time = seconds_since(start);
    if (log) {
      *log << "event=solve delta=" << fmt(delta) << " outcome=" << to_string(rec.outcome)
           << " objective=" << fmt(rec.objective) << " nodes=" << rec.nodes << " time=" << rec.solve_time << "\n";
    }
    return rec;
  };

  Lattice lattice;
  try {
    lattice = lattice_points(cfg.spec.domain_edge, cfg.spec.dim, delta);
  } catch (const std::invalid_argument& e) {
    rec.messages.push_back(e.what());
    return finish();
  }
  const ValidationReport report = validate_spec(cfg.spec, cfg.fn, lattice, cfg.tol);
  if (!report.passed()) {
    rec.messages = report.failures();
    return finish();
  }

  rec.lipschitz = lipschitz_certificate(cfg.spec, cfg.fn);
  if (rec.lipschitz.no_safe_step) {
    rec.messages.push_back("threshold b >= 1: no lattice step guarantees a feasible safe approximation");
  } else if (delta > rec.lipschitz.delta_max) {
    rec.messages.push_back("delta=" + fmt(delta) + " exceeds delta_max=" + fmt(rec.lipschitz.delta_max) +
                           "; feasibility is not guaranteed");
  }
  const AssemblyOptions ao = AssemblyOptions::from(rec.lipschitz);
  Incumbent inc;
  try {
    if (rec.fixed_boxes) {
      const AssembledModel model = assemble_case1(cfg.spec, cfg.fn, lattice, rec.lipschitz.L, ao);
      rec.margin = model.margin;
      inc = solve_case1(model, cfg.search.solver);
    } else {
      const AssembledModel model = assemble_case2(cfg.spec, cfg.fn, lattice, rec.lipschitz.L, ao);
      rec.margin = model.margin;
      SearchOptions so = cfg.search;
      so.log = log;
      std::vector<std::string> warnings;
      inc = solve_case2(model, so, &warnings);
      rec.messages.insert(rec.messages.end(), warnings.begin(), warnings.end());
    }
  } catch (const std::invalid_argument& e) {
    rec.messages.push_back(e.what());
    return finish();
  } catch (const InstanceTooLarge& e) {
    rec.messages.push_back(e.what());
    return finish();
  }

  rec.proof = to_string(inc.proof);
  rec.nodes = inc.node_count;
  rec.sdp_solves = inc.sdp_solves;
  rec.best_bound = inc.best_bound;
  switch (inc.status) {
    case Incumbent::Status::kInfeasible:
      rec.outcome = SolveRecord::Outcome::kInfeasible;
      rec.messages.push_back("no safe decision exists at delta=" + fmt(delta) +
                             "; steps up to delta_max=" + fmt(rec.lipschitz.delta_max) + " guarantee feasibility");
      return finish();
    case Incumbent::Status::kNoSolution:
      rec.outcome = SolveRecord::Outcome::kNoSolution;
      rec.messages.push_back("no decision found within the limits");
      return finish();
    case Incumbent::Status::kFeasible:
      break;
  }
  rec.outcome = SolveRecord::Outcome::kSolved;
  rec.objective = inc.objective;
  rec.decision = decision_of(inc);
  rec.duals = inc.dual_vars;
  rec.min_slack = inc.min_slack;
  finish();

  if (certify) {
    const auto cstart = Clock::now();
    rec.certificate = certify_record(cfg, rec);
    rec.certify_time = seconds_since(cstart);
    if (log) {
      const auto& c = *rec.certificate;
      *log << "event=certify delta=" << fmt(delta) << " verdict=" << to_string(c.verdict)
           << " worst_case_expectation=" << fmt(c.worst_case_expectation) << " duality_gap=" << fmt(c.duality_gap)
           << " fc_min_sampled=" << fmt(c.fc_min_sampled) << " time=" << rec.certify_time << "\n";
    }
  }
  return rec;
}

Certificate certify_record(const RunConfig& cfg, const SolveRecord& record) {
  return certify(record.decision, record.duals, cfg.spec, record.delta, cfg.certify);
}

ExitCode exit_code(const Certificate& cert) {
  switch (cert.verdict) {
    case Certificate::Verdict::kCertified: return ExitCode::kCertified;
    case Certificate::Verdict::kFalsified: return ExitCode::kFalsified;
    case Certificate::Verdict::kInconclusive: return ExitCode::kUndecided;
  }
  return ExitCode::kUndecided;
}

ExitCode exit_code(const SolveRecord& record) {
  switch (record.outcome) {
    case SolveRecord::Outcome::kInvalid: return ExitCode::kInvalid;
    case SolveRecord::Outcome::kInfeasible: return ExitCode::kInfeasible;
    case SolveRecord::Outcome::kNoSolution: return ExitCode::kUndecided;
    case SolveRecord::Outcome::kSolved: break;
  }
  return record.certificate ? exit_code(*record.certificate) : ExitCode::kUndecided;
}

json to_json(const Certificate& cert) {
  return {{"verdict", to_string(cert.verdict)},
          {"worst_case_expectation", cert.worst_case_expectation},
          {"duality_gap", cert.duality_gap},
          {"fc_min_sampled", finite_or_null(cert.fc_min_sampled)},
          {"fc_argmin", vector_json(cert.fc_argmin)},
          {"fine_delta", cert.fine_delta},
          {"samples", cert.samples},
          {"warnings", cert.warnings}};
}

Certificate certificate_from_json(const json& j) {
  try {
    Certificate c;
    c.verdict = verdict_from(j.at("verdict").get<std::string>());
    c.worst_case_expectation = j.at("worst_case_expectation").get<double>();
    c.duality_gap = j.at("duality_gap").get<double>();
    c.fc_min_sampled = number_or(j, "fc_min_sampled", kInf);
    c.fc_argmin = vector_from(j.at("fc_argmin"));
    c.fine_delta = j.at("fine_delta").get<double>();
    c.samples = j.at("samples").get<int>();
    c.warnings = j.at("warnings").get<std::vector<std::string>>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(0, std::string("malformed certificate: ") + e.what());
  }
}

json to_json(const SolveRecord& r) {
  json boxes = json::array();
  for (const auto& b : r.decision.boxes) {
    if (b.empty()) {
      boxes.push_back({{"empty", true}, {"dim", b.dim()}});
    } else {
      boxes.push_back({{"lower", vector_json(b.lower)}, {"upper", vector_json(b.upper)}});
    }
  }
  const auto& lc = r.lipschitz;
  return {{"delta", r.delta},
          {"case", r.fixed_boxes ? "fixed_boxes" : "variable_boxes"},
          {"outcome", to_string(r.outcome)},
          {"proof", r.proof},
          {"objective", r.objective},
          {"best_bound", finite_or_null(r.best_bound)},
          {"boxes", boxes},
          {"heights", vector_json(r.decision.heights)},
          {"multipliers", {{"Y1", matrix_json(r.duals.y1)}, {"Y2", matrix_json(r.duals.y2)}, {"y", vector_json(r.duals.y)}}},
          {"min_slack", finite_or_null(r.min_slack)},
          {"lipschitz",
           {{"L", lc.L},
            {"delta_max", lc.delta_max},
            {"tr_y1_max", lc.tr_y1_max},
            {"tr_y2_max", lc.tr_y2_max},
            {"lambda_min_block", lc.lambda_min_block},
            {"lambda_min_sigma", lc.lambda_min_sigma},
            {"no_safe_step", lc.no_safe_step}}},
          {"margin", r.margin},
          {"nodes", r.nodes},
          {"sdp_solves", r.sdp_solves},
          {"solve_time", r.solve_time},
          {"certify_time", r.certify_time},
          {"certificate", r.certificate ? to_json(*r.certificate) : json(nullptr)},
          {"messages", r.messages}};
}

SolveRecord record_from_json(const json& j) {
  try {
    SolveRecord r;
    r.delta = j.at("delta").get<double>();
    r.fixed_boxes = j.at("case").get<std::string>() == "fixed_boxes";
    r.outcome = outcome_from(j.at("outcome").get<std::string>());
    r.proof = j.at("proof").get<std::string>();
    r.objective = j.at("objective").get<double>();
    r.best_bound = number_or(j, "best_bound", kInf);
    const Vector heights = vector_from(j.at("heights"));
    r.decision.heights = heights;
    const auto& boxes = j.at("boxes");
    for (const auto& b : boxes) {
      if (b.value("empty", false)) {
        r.decision.boxes.push_back(empty_box(b.at("dim").get<int>()));
      } else {
        r.decision.boxes.push_back({vector_from(b.at("lower")), vector_from(b.at("upper"))});
      }
    }
    const auto& mult = j.at("multipliers");
    r.duals.y1 = matrix_from(mult.at("Y1"));
    r.duals.y2 = matrix_from(mult.at("Y2"));
    r.duals.y = vector_from(mult.at("y"));
    r.min_slack = number_or(j, "min_slack", kInf);
    const auto& lc = j.at("lipschitz");
    r.lipschitz.L = lc.at("L").get<double>();
    r.lipschitz.delta_max = lc.at("delta_max").get<double>();
    r.lipschitz.tr_y1_max = lc.at("tr_y1_max").get<double>();
    r.lipschitz.tr_y2_max = lc.at("tr_y2_max").get<double>();
    r.lipschitz.lambda_min_block = lc.at("lambda_min_block").get<double>();
    r.lipschitz.lambda_min_sigma = lc.at("lambda_min_sigma").get<double>();
    r.lipschitz.no_safe_step = lc.at("no_safe_step").get<bool>();
    r.margin = j.at("margin").get<double>();
    r.nodes = j.at("nodes").get<long>();
    r.sdp_solves = j.at("sdp_solves").get<long>();
    r.solve_time = j.at("solve_time").get<double>();
    r.certify_time = j.at("certify_time").get<double>();
    if (!j.at("certificate").is_null()) r.certificate = certificate_from_json(j.at("certificate"));
    r.messages = j.at("messages").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(0, std::string("malformed record: ") + e.what());
  }
}

std::string sweep_header() { return "delta,objective,nodes,wall_time,certified,status"; }

std::string sweep_row(const SolveRecord& r) {
  const bool solved = r.outcome == SolveRecord::Outcome::kSolved;
  const bool certified = r.certificate && r.certificate->verdict == Certificate::Verdict::kCertified;
  std::string status = to_string(r.outcome);
  if (solved && r.certificate) status = to_string(r.certificate->verdict);
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.3f", r.solve_time + r.certify_time);
  return fmt(r.delta) + "," + (solved ? fmt(r.objective) : std::string()) + "," + std::to_string(r.nodes) + "," +
         wall + "," + (certified ? "yes" : "no") + "," + status;
}

}  // namespace safedro
