#pragma once

#include "safedro/certify.hpp"
#include "safedro/config.hpp"
#include "safedro/lipschitz.hpp"
#include "safedro/search.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace safedro {

/// Process exit codes shared by all commands.
enum class ExitCode : int {
  kCertified = 0,
  kInvalid = 1,
  kParse = 2,
  kFalsified = 3,
  kInfeasible = 4,
  /// No decision or no verdict: resource limit, failed solve, inconclusive certificate.
  kUndecided = 5,
};

/// Everything one solve produces at one lattice step.
struct SolveRecord {
  enum class Outcome { kSolved, kInfeasible, kNoSolution, kInvalid };
  double delta = 0.0;
  bool fixed_boxes = false;
  Outcome outcome = Outcome::kInvalid;
  std::string proof;
  double objective = 0.0;
  double best_bound = 0.0;
  Decision decision;
  DualVars duals;
  double min_slack = 0.0;
  LipschitzCertificate lipschitz;
  double margin = 0.0;
  long nodes = 0;
  long sdp_solves = 0;
  double solve_time = 0.0;
  double certify_time = 0.0;
  std::optional<Certificate> certificate;
  std::vector<std::string> messages;
};

const char* to_string(SolveRecord::Outcome outcome);

/// validate_spec on the lattice of every configured step; a step that does not
/// divide the domain edge is reported as a failed item.
ValidationReport validate_config(const RunConfig& cfg);

/// Validates, assembles, solves and (when a decision is found and `certify`
/// is set) certifies at one step. Progress lines go to `log` when non-null.
SolveRecord solve_at(const RunConfig& cfg, double delta, std::ostream* log, bool certify = true);

/// Certifies the decision and multipliers stored in a record.
Certificate certify_record(const RunConfig& cfg, const SolveRecord& record);

ExitCode exit_code(const SolveRecord& record);
ExitCode exit_code(const Certificate& cert);

nlohmann::json to_json(const Certificate& cert);
Certificate certificate_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SolveRecord& record);
/// Inverse of to_json; throws ConfigError on a malformed record.
SolveRecord record_from_json(const nlohmann::json& j);

/// CSV header and row of the sweep table.
std::string sweep_header();
std::string sweep_row(const SolveRecord& record);

}  // namespace safedro
