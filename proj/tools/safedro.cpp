#include "safedro/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace safedro;

namespace {

struct Flags {
  std::string config;
  std::string solution;
  std::vector<std::string> deltas;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> time_limit;
  std::string mode;
  std::string fine_delta;
};

int code(ExitCode c) { return static_cast<int>(c); }

// Applies command-line overrides; throws ConfigError on a bad value.
RunConfig load(const Flags& f) {
  RunConfig cfg = load_config(f.config);
  if (!f.deltas.empty()) {
    cfg.deltas.clear();
    for (const auto& d : f.deltas) {
      try {
        cfg.deltas.push_back(parse_step(d));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(0, std::string("--delta: ") + e.what());
      }
    }
  }
  if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
  if (f.seed) cfg.certify.seed = *f.seed;
  if (f.time_limit) cfg.search.time_limit = *f.time_limit;
  if (f.mode == "bnb") cfg.search.mode = SearchOptions::Mode::kBnb;
  if (f.mode == "enumerate") cfg.search.mode = SearchOptions::Mode::kEnumerate;
  if (f.mode == "both") cfg.search.mode = SearchOptions::Mode::kBoth;
  if (!f.fine_delta.empty()) {
    try {
      cfg.certify.fine_delta = parse_step(f.fine_delta);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(0, std::string("--fine-delta: ") + e.what());
    }
  }
  return cfg;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

void print_record(const SolveRecord& r) {
  std::printf("delta=%.10g outcome=%s", r.delta, to_string(r.outcome));
  if (r.outcome == SolveRecord::Outcome::kSolved) std::printf(" objective=%.10g", r.objective);
  std::printf(" L=%.6f delta_max=%.6f nodes=%ld time=%.3f\n", r.lipschitz.L, r.lipschitz.delta_max, r.nodes,
              r.solve_time);
  for (std::size_t i = 0; i < r.decision.boxes.size(); ++i) {
    const auto& b = r.decision.boxes[i];
    std::printf("  box %zu height=%.6g", i + 1, r.decision.heights(static_cast<Eigen::Index>(i)));
    if (b.empty()) {
      std::printf(" empty\n");
      continue;
    }
    for (int j = 0; j < b.dim(); ++j) std::printf(" [%.6g, %.6g]", b.lower(j), b.upper(j));
    std::printf("\n");
  }
  if (r.certificate) {
    const auto& c = *r.certificate;
    std::printf("  certificate verdict=%s worst_case_expectation=%.9g duality_gap=%.3g fc_min_sampled=%.3g\n",
                to_string(c.verdict), c.worst_case_expectation, c.duality_gap, c.fc_min_sampled);
    for (const auto& w : c.warnings) std::printf("  warning: %s\n", w.c_str());
  }
  for (const auto& m : r.messages) std::printf("  note: %s\n", m.c_str());
}

int cmd_validate(const Flags& f) {
  const RunConfig cfg = load(f);
  const ValidationReport report = validate_config(cfg);
  for (const auto& item : report.items) {
    std::printf("%s %s%s%s\n", item.passed ? "pass" : "FAIL", item.check.c_str(), item.passed ? "" : ": ",
                item.passed ? "" : item.message.c_str());
  }
  if (!report.passed()) return code(ExitCode::kInvalid);
  const LipschitzCertificate lc = lipschitz_certificate(cfg.spec, cfg.fn);
  std::printf("L=%.6f tr_y1_max=%.6f tr_y2_max=%.6f delta_max=%.6f\n", lc.L, lc.tr_y1_max, lc.tr_y2_max, lc.delta_max);
  return code(ExitCode::kCertified);
}

int cmd_solve(const Flags& f) {
  const RunConfig cfg = load(f);
  fs::create_directories(cfg.out_dir);
  std::ofstream log(fs::path(cfg.out_dir) / "solver.log");
  const SolveRecord r = solve_at(cfg, cfg.deltas.front(), &log);
  write_json(fs::path(cfg.out_dir) / "result.json", to_json(r));
  print_record(r);
  return code(exit_code(r));
}

int cmd_sweep(const Flags& f) {
  const RunConfig cfg = load(f);
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  std::ofstream log(dir / "solver.log");
  std::ofstream table(dir / "sweep.csv");
  std::ofstream plot(dir / "sweep_plot.dat");
  table << sweep_header() << "\n";
  plot << "# delta objective\n" << std::setprecision(10);
  int result = code(ExitCode::kCertified);
  for (std::size_t i = 0; i < cfg.deltas.size(); ++i) {
    const SolveRecord r = solve_at(cfg, cfg.deltas[i], &log);
    write_json(dir / ("result_" + std::to_string(i + 1) + ".json"), to_json(r));
    table << sweep_row(r) << "\n" << std::flush;
    if (r.outcome == SolveRecord::Outcome::kSolved) plot << r.delta << " " << r.objective << "\n";
    print_record(r);
    if (result == code(ExitCode::kCertified)) result = code(exit_code(r));
  }
  return result;
}

int cmd_certify(const Flags& f) {
  const RunConfig cfg = load(f);
  std::ifstream in(f.solution);
  if (!in) throw ConfigError(0, "cannot open solution record " + f.solution);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(0, std::string("solution record: ") + e.what());
  }
  const SolveRecord r = record_from_json(j);
  if (r.outcome != SolveRecord::Outcome::kSolved) {
    std::printf("record holds no decision (outcome=%s)\n", to_string(r.outcome));
    return code(exit_code(r));
  }
  const Certificate c = certify_record(cfg, r);
  fs::create_directories(cfg.out_dir);
  write_json(fs::path(cfg.out_dir) / "certificate.json", to_json(c));
  std::printf("verdict=%s worst_case_expectation=%.9g duality_gap=%.3g fc_min_sampled=%.3g fine_delta=%.6g\n",
              to_string(c.verdict), c.worst_case_expectation, c.duality_gap, c.fc_min_sampled, c.fine_delta);
  for (const auto& w : c.warnings) std::printf("warning: %s\n", w.c_str());
  return code(exit_code(c));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe approximations of distributionally robust constraints with simple functions"};
  app.require_subcommand(1);
  Flags f;
  auto add_common = [&f](CLI::App* sub) {
    sub->add_option("--config", f.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out-dir", f.out_dir, "output directory (overrides the config)");
  };
  auto add_run = [&f](CLI::App* sub) {
    sub->add_option("--delta", f.deltas, "lattice step, decimal or p/q (repeatable)");
    sub->add_option("--seed", f.seed, "sampling seed of the certificate");
    sub->add_option("--time-limit", f.time_limit, "search time limit in seconds");
    sub->add_option("--mode", f.mode, "box search")->check(CLI::IsMember({"bnb", "enumerate", "both"}));
    sub->add_option("--fine-delta", f.fine_delta, "oracle lattice step (default: half the step)");
  };
  auto* validate = app.add_subcommand("validate", "check a configuration");
  add_common(validate);
  validate->add_option("--delta", f.deltas, "lattice step, decimal or p/q (repeatable)");
  auto* solve = app.add_subcommand("solve", "solve and certify at the first lattice step");
  add_common(solve);
  add_run(solve);
  auto* sweep = app.add_subcommand("sweep", "solve and certify at every lattice step");
  add_common(sweep);
  add_run(sweep);
  auto* certify = app.add_subcommand("certify", "certify a stored result record");
  add_common(certify);
  certify->add_option("--solution", f.solution, "result record (JSON)")->required()->check(CLI::ExistingFile);
  certify->add_option("--seed", f.seed, "sampling seed");
  certify->add_option("--fine-delta", f.fine_delta, "oracle lattice step (default: half the step)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : code(ExitCode::kParse);
  }
  try {
    if (*validate) return cmd_validate(f);
    if (*solve) return cmd_solve(f);
    if (*sweep) return cmd_sweep(f);
    return cmd_certify(f);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s: %s\n", f.config.c_str(), e.what());
    return code(ExitCode::kParse);
  }
}
