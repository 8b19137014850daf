#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "dbf/baselines.hpp"
#include "dbf/diagnostics.hpp"

namespace dbf {

// Harness configuration for one named experiment. Zero / empty fields fall
// back to the experiment's own defaults; overrides carries free-form
// key -> value settings for knobs individual experiments understand.
struct ExperimentSpec {
  std::string id;  // e1..e14, mvp_cost, verify
  Eigen::Index n = 0;
  int seeds = 0;
  std::vector<double> sigma2_grid;
  std::vector<double> eps_e_grid;
  int workers = 0;  // 0: DBF_WORKERS env var, then hardware concurrency
  std::map<std::string, std::string> overrides;
};

using ResultCell = std::variant<std::int64_t, double, std::string>;

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<ResultCell>> rows;
  std::map<std::string, std::string> metadata;

  void add_row(std::vector<ResultCell> row);
  std::string to_csv() const;
  std::string to_json() const;
};

/// Execute the named experiment; deterministic in (spec, seeds).
ResultTable run_experiment(const ExperimentSpec& spec);

/// Write the table as csv or json to path ("" or "-" means stdout).
void emit(const ResultTable& table, const std::string& format, const std::string& path);

struct PropertyCheckResult {
  std::string name;
  int trials = 0;
  int violations = 0;
  std::string detail;
};

/// The invariant battery behind `dbf verify`: algebraic identities and
/// inequalities checked over seeded random instances.
std::vector<PropertyCheckResult> run_property_battery();

}  // namespace dbf
