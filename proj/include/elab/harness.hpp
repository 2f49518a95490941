#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "elab/analysis.hpp"

namespace elab {

struct TimeGridSpec {
  enum class Spacing { Linear, Log };
  double min = 0.25;
  double max = 4.0;
  int count = 16;
  Spacing spacing = Spacing::Linear;

  std::vector<double> values() const;
  bool operator==(const TimeGridSpec&) const = default;
};

inline const std::vector<std::string>& analysis_names() {
  static const std::vector<std::string> names = {"entropy-curve", "conditions", "local",      "bounds",
                                                 "classify",      "separation", "rigidity",   "divergence"};
  return names;
}

/// One scenario file. Grammar: `key = value` lines, `#` comments, keys
///   id, model, solution, kernel, x, t_grid.{min,max,count,spacing},
///   mc.{paths,dt,seed,scheme,exit_policy}, domains (`;`-separated), analyses
///   (`,`-separated), refine, bounds.delta.
/// The mc block is optional; without it the scenario is quadrature only.
struct Scenario {
  std::string id;
  std::string model;
  std::string solution;
  std::string kernel = "auto";
  std::vector<double> x;  // chart point; three embedding coordinates on the sphere
  TimeGridSpec t_grid;
  std::optional<SdeConfig> mc;
  std::vector<std::string> domains;
  std::vector<std::string> analyses;
  int refine = 0;
  double delta = 1.0;

  bool operator==(const Scenario& o) const;
};

/// Parses and validates (ids resolve, times inside the windows); throws ConfigError.
Scenario parse_scenario(std::string_view text);
std::string serialize_scenario(const Scenario& s);
Scenario load_scenario(const std::string& path);

/// Objects a scenario resolves to.
struct ScenarioObjects {
  MetricModel model;
  SolutionField solution;
  std::optional<HeatKernelField> kernel;  // absent without an analytic kernel
  Point x;
  std::vector<DomainSpec> domains;
};
ScenarioObjects resolve(const Scenario& s);

struct Overrides {
  std::optional<std::size_t> paths;
  std::optional<double> dt;
  std::optional<std::uint64_t> seed;
  std::optional<int> refine;
};
Scenario apply_overrides(Scenario s, const Overrides& o);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RunManifest {
  std::string scenario_id;
  std::string version;
  std::optional<std::uint64_t> seed;
  int refine = 0;
  std::vector<int> refinement_levels;  // level E settled at, per quadrature time
  std::vector<std::string> outputs;
  std::vector<StageTiming> timings;
};

/// Runs the requested analyses and writes entropy.csv, local.csv (when
/// domains are given), analysis.json and manifest.json into out_dir.
RunManifest run_scenario(const Scenario& s, const std::string& out_dir);
RunManifest run(const std::string& config_path, const std::string& out_dir, const Overrides& o = {});

// Output writers (exposed for schema tests).
inline constexpr std::string_view kEntropyCsvHeader =
    "t,E,E_stderr,Eprime,Eprime_stderr,Esecond,Esecond_stderr,cond1,cond2,cond0a,method,"
    "Eprime_divergent,Esecond_divergent,cond1_divergent,cond2_divergent,cond0a_divergent";
inline constexpr std::string_view kLocalCsvHeader = "domain_index,t,E_D,stderr,censored_frac";

void write_entropy_csv(std::ostream& os, const std::vector<EntropyCurve>& curves);
void write_local_csv(std::ostream& os, const LocalEntropyTable& table, const PathEnsemble& e);
std::string format_number(double v);

/// Library version string (git describe at configure time).
std::string_view version() noexcept;

// ---------------------------------------------------------------------------

struct CriterionRow {
  std::string name;
  std::string measured;
  std::string target;
  bool pass = false;
};

struct CriterionResult {
  int number = 0;
  std::string title;
  std::vector<CriterionRow> rows;
  double seconds = 0.0;
  bool pass() const;
};

enum class Suite { Examples, Properties, All };
Suite parse_suite(std::string_view name);
std::vector<int> suite_criteria(Suite s);

/// Runs one acceptance criterion (1..12).
CriterionResult run_criterion(int number);

/// Runs a suite, prints the table, returns 0 iff every criterion passes.
int verify(Suite s, std::ostream& out);

}  // namespace elab
