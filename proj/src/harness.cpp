#include "elab/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace elab {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

double parse_double(const std::string& key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) config_error("key '" + key + "': not a number: '" + std::string(v) + "'");
  return out;
}

std::uint64_t parse_uint(const std::string& key, std::string_view v) {
  int base = 10;
  if (v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X')) {
    v.remove_prefix(2);
    base = 16;
  }
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out, base);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    config_error("key '" + key + "': not a nonnegative integer: '" + std::string(v) + "'");
  }
  return out;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::uppercase << std::hex << v;
  return os.str();
}

std::string scheme_name(Scheme s) { return s == Scheme::ProjectedSphere ? "projected-sphere" : "euler-maruyama"; }
std::string policy_name(ExitPolicy p) { return p == ExitPolicy::GridCrossing ? "grid-crossing" : "brownian-bridge"; }

template <class F>
auto as_config_error(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    config_error(what + ": " + e.what());
  }
}

Point chart_point(const MetricModel& m, const std::vector<double>& x) {
  if (m.kind() == ModelKind::ConformalSphere2 && x.size() == 3) {
    const Vec3 y(x[0], x[1], x[2]);
    if (std::abs(y.norm() - 1.0) > 1e-9) config_error("sphere base point must be a unit vector");
    return sphere_chart(y);
  }
  Point p(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) p(static_cast<Eigen::Index>(i)) = x[i];
  return p;
}

void validate_scenario(const Scenario& s) {
  if (s.id.empty()) config_error("missing key 'id'");
  if (s.model.empty()) config_error("missing key 'model'");
  if (s.solution.empty()) config_error("missing key 'solution'");
  const auto& g = s.t_grid;
  if (!(g.min > 0.0) || !(g.max >= g.min) || g.count < 1) config_error("t_grid needs 0 < min <= max and count >= 1");
  if (s.refine < 0) config_error("refine must be >= 0");
  if (!(s.delta > 0.0)) config_error("bounds.delta must be positive");
  if (s.mc) {
    if (s.mc->n_paths < 1) config_error("mc.paths must be >= 1");
    if (!(s.mc->dt > 0.0)) config_error("mc.dt must be positive");
  }
  for (const auto& a : s.analyses) {
    if (std::find(analysis_names().begin(), analysis_names().end(), a) == analysis_names().end()) {
      config_error("unknown analysis '" + a + "'");
    }
  }
  const auto objs = resolve(s);
  for (const auto& w : {objs.model.window(), objs.solution.window()}) {
    if (!w.contains(g.min) || !w.contains(g.max)) {
      std::ostringstream os;
      os << "t_grid [" << g.min << ", " << g.max << "] leaves the time window [" << w.t_min << ", " << w.t_max
         << "] of model " << objs.model.id() << " with solution " << objs.solution.id();
      config_error(os.str());
    }
  }
  if (s.mc && s.mc->scheme == Scheme::ProjectedSphere && objs.model.kind() != ModelKind::ConformalSphere2) {
    config_error("mc.scheme projected-sphere needs a sphere model");
  }
}

json num(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

json estimate_json(const Estimate& e) {
  return {{"mean", num(e.mean)}, {"stderr", num(e.std_error)}, {"n", e.n}, {"censored_fraction", e.censored_fraction}};
}

std::string_view convergence_name(Convergence c) {
  switch (c) {
    case Convergence::Stable: return "stable";
    case Convergence::Divergent: return "divergent";
    case Convergence::Unstable: return "unstable";
  }
  return "?";
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
  return v;
}

// Points x + s e_1, s in [-1, 1], kept inside the chart.
std::vector<Point> probe_points(const MetricModel& m, const Point& x) {
  std::vector<Point> out;
  for (int j = 0; j < 9; ++j) {
    Point y = x;
    y(0) += -1.0 + 0.25 * j;
    if (m.in_chart(y)) out.push_back(y);
  }
  return out;
}

// Recorded time closest to t (record times snap to the step grid).
double snap(const PathEnsemble& e, double t) {
  const auto& ts = e.times();
  return *std::min_element(ts.begin(), ts.end(), [t](double a, double b) { return std::abs(a - t) < std::abs(b - t); });
}

}  // namespace

std::string_view version() noexcept { return ELAB_VERSION; }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<double> TimeGridSpec::values() const {
  std::vector<double> v;
  if (count == 1) return {min};
  for (int i = 0; i < count; ++i) {
    const double f = double(i) / (count - 1);
    v.push_back(spacing == Spacing::Log ? min * std::pow(max / min, f) : min + (max - min) * f);
  }
  v.front() = min;
  v.back() = max;
  return v;
}

bool Scenario::operator==(const Scenario& o) const {
  const auto same_mc = [](const std::optional<SdeConfig>& a, const std::optional<SdeConfig>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    return a->n_paths == b->n_paths && a->dt == b->dt && a->seed == b->seed && a->scheme == b->scheme &&
           a->exit_policy == b->exit_policy;
  };
  return id == o.id && model == o.model && solution == o.solution && kernel == o.kernel && x == o.x &&
         t_grid == o.t_grid && same_mc(mc, o.mc) && domains == o.domains && analyses == o.analyses &&
         refine == o.refine && delta == o.delta;
}

Scenario parse_scenario(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view l = line;
    if (const auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
    l = trim(l);
    if (l.empty()) continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) config_error("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key(trim(l.substr(0, eq)));
    if (kv.count(key)) config_error("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = std::string(trim(l.substr(eq + 1)));
  }

  Scenario s;
  bool any_mc = false;
  SdeConfig mc;
  bool scheme_given = false;
  for (const auto& [key, v] : kv) {
    if (key == "id") s.id = v;
    else if (key == "model") s.model = v;
    else if (key == "solution") s.solution = v;
    else if (key == "kernel") s.kernel = v;
    else if (key == "x") {
      for (const auto& c : split(v, ',')) s.x.push_back(parse_double(key, c));
    } else if (key == "t_grid.min") s.t_grid.min = parse_double(key, v);
    else if (key == "t_grid.max") s.t_grid.max = parse_double(key, v);
    else if (key == "t_grid.count") s.t_grid.count = static_cast<int>(parse_uint(key, v));
    else if (key == "t_grid.spacing") {
      if (v == "linear") s.t_grid.spacing = TimeGridSpec::Spacing::Linear;
      else if (v == "log") s.t_grid.spacing = TimeGridSpec::Spacing::Log;
      else config_error("t_grid.spacing must be 'linear' or 'log'");
    } else if (key.rfind("mc.", 0) == 0) {
      any_mc = true;
      if (key == "mc.paths") mc.n_paths = parse_uint(key, v);
      else if (key == "mc.dt") mc.dt = parse_double(key, v);
      else if (key == "mc.seed") mc.seed = parse_uint(key, v);
      else if (key == "mc.scheme") {
        scheme_given = true;
        if (v == "euler-maruyama") mc.scheme = Scheme::EulerMaruyama;
        else if (v == "projected-sphere") mc.scheme = Scheme::ProjectedSphere;
        else config_error("mc.scheme must be 'euler-maruyama' or 'projected-sphere'");
      } else if (key == "mc.exit_policy") {
        if (v == "brownian-bridge") mc.exit_policy = ExitPolicy::BrownianBridge;
        else if (v == "grid-crossing") mc.exit_policy = ExitPolicy::GridCrossing;
        else config_error("mc.exit_policy must be 'brownian-bridge' or 'grid-crossing'");
      } else {
        config_error("unknown key '" + key + "'");
      }
    } else if (key == "domains") s.domains = split(v, ';');
    else if (key == "analyses") s.analyses = split(v, ',');
    else if (key == "refine") s.refine = static_cast<int>(parse_uint(key, v));
    else if (key == "bounds.delta") s.delta = parse_double(key, v);
    else config_error("unknown key '" + key + "'");
  }
  if (s.analyses.empty()) s.analyses = {"entropy-curve"};
  if (any_mc) {
    if (!scheme_given && !s.model.empty()) {
      mc.scheme = default_scheme(as_config_error("model", [&] { return parse_model(s.model); }));
    }
    s.mc = mc;
  }
  validate_scenario(s);
  return s;
}

std::string serialize_scenario(const Scenario& s) {
  std::ostringstream os;
  os << "id = " << s.id << "\n";
  os << "model = " << s.model << "\n";
  os << "solution = " << s.solution << "\n";
  os << "kernel = " << s.kernel << "\n";
  os << "x = ";
  for (std::size_t i = 0; i < s.x.size(); ++i) os << (i ? ", " : "") << format_number(s.x[i]);
  os << "\n";
  os << "t_grid.min = " << format_number(s.t_grid.min) << "\n";
  os << "t_grid.max = " << format_number(s.t_grid.max) << "\n";
  os << "t_grid.count = " << s.t_grid.count << "\n";
  os << "t_grid.spacing = " << (s.t_grid.spacing == TimeGridSpec::Spacing::Log ? "log" : "linear") << "\n";
  if (s.mc) {
    os << "mc.paths = " << s.mc->n_paths << "\n";
    os << "mc.dt = " << format_number(s.mc->dt) << "\n";
    os << "mc.seed = " << hex(s.mc->seed) << "\n";
    os << "mc.scheme = " << scheme_name(s.mc->scheme) << "\n";
    os << "mc.exit_policy = " << policy_name(s.mc->exit_policy) << "\n";
  }
  if (!s.domains.empty()) {
    os << "domains = ";
    for (std::size_t i = 0; i < s.domains.size(); ++i) os << (i ? "; " : "") << s.domains[i];
    os << "\n";
  }
  os << "analyses = ";
  for (std::size_t i = 0; i < s.analyses.size(); ++i) os << (i ? ", " : "") << s.analyses[i];
  os << "\n";
  os << "refine = " << s.refine << "\n";
  os << "bounds.delta = " << format_number(s.delta) << "\n";
  return os.str();
}

Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IoError, "cannot open scenario file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return parse_scenario(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

ScenarioObjects resolve(const Scenario& s) {
  const MetricModel model = as_config_error("model", [&] { return parse_model(s.model); });
  SolutionField sol = as_config_error("solution", [&] { return parse_solution(s.solution, model); });
  const Point x = as_config_error("x", [&] {
    Point p = chart_point(model, s.x);
    model.require_point(p);
    return p;
  });
  std::optional<HeatKernelField> kernel;
  if (s.kernel == "auto") {
    if (model.kind() != ModelKind::HyperbolicPlaneStatic) kernel = HeatKernelField::canonical(model, x);
  } else {
    kernel = as_config_error("kernel", [&] { return parse_kernel(s.kernel, model, x); });
  }
  std::vector<DomainSpec> domains;
  for (const auto& d : s.domains) {
    domains.push_back(as_config_error("domain", [&] {
      DomainSpec spec = parse_domain(d);
      spec.validate(model);
      return spec;
    }));
  }
  return {model, std::move(sol), std::move(kernel), x, std::move(domains)};
}

Scenario apply_overrides(Scenario s, const Overrides& o) {
  if (o.paths || o.dt || o.seed) {
    if (!s.mc) {
      s.mc = SdeConfig{};
      s.mc->scheme = default_scheme(parse_model(s.model));
    }
    if (o.paths) s.mc->n_paths = *o.paths;
    if (o.dt) s.mc->dt = *o.dt;
    if (o.seed) s.mc->seed = *o.seed;
  }
  if (o.refine) s.refine = *o.refine;
  validate_scenario(s);
  return s;
}

void write_entropy_csv(std::ostream& os, const std::vector<EntropyCurve>& curves) {
  os << kEntropyCsvHeader << "\n";
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      std::string c1 = "nan", c2 = "nan", c0 = "nan";
      bool d1 = false, d2 = false, d0 = false;
      if (p.conditions) {
        c1 = format_number(p.conditions->cond1.value);
        c2 = format_number(p.conditions->cond2.value);
        c0 = format_number(p.conditions->cond0a.value);
        d1 = p.conditions->cond1.divergent;
        d2 = p.conditions->cond2.divergent;
        d0 = p.conditions->cond0a.divergent;
      }
      const bool dp = std::isinf(p.Eprime.mean), ds = std::isinf(p.Esecond.mean);
      os << format_number(p.t) << ',' << format_number(p.E.mean) << ',' << format_number(p.E.std_error) << ','
         << format_number(p.Eprime.mean) << ',' << format_number(p.Eprime.std_error) << ','
         << format_number(p.Esecond.mean) << ',' << format_number(p.Esecond.std_error) << ',' << c1 << ',' << c2
         << ',' << c0 << ',' << (p.method == Method::Quadrature ? "quadrature" : "monte-carlo") << ','
         << (dp ? "true" : "false") << ',' << (ds ? "true" : "false") << ',' << (d1 ? "true" : "false") << ','
         << (d2 ? "true" : "false") << ',' << (d0 ? "true" : "false") << "\n";
    }
  }
}

void write_local_csv(std::ostream& os, const LocalEntropyTable& table, const PathEnsemble& e) {
  os << kLocalCsvHeader << "\n";
  for (std::size_t k = 0; k < table.domains.size(); ++k) {
    const auto rec = e.exits(table.domains[k]);
    for (std::size_t j = 0; j < table.t_grid.size(); ++j) {
      const double t = table.t_grid[j];
      std::size_t running = 0;
      for (const auto& r : rec) running += r.status == ExitStatus::Censored || r.tau > t;
      os << k << ',' << format_number(t) << ',' << format_number(table.E_D[k][j].mean) << ','
         << format_number(table.E_D[k][j].std_error) << ','
         << format_number(double(running) / double(e.n_paths())) << "\n";
    }
  }
}

RunManifest run_scenario(const Scenario& s, const std::string& out_dir) {
  using clock = std::chrono::steady_clock;
  RunManifest man;
  man.scenario_id = s.id;
  man.version = std::string(version());
  man.refine = s.refine;
  if (s.mc) man.seed = s.mc->seed;
  std::filesystem::create_directories(out_dir);

  auto t0 = clock::now();
  const auto stage = [&](const std::string& name) {
    const auto t1 = clock::now();
    man.timings.push_back({name, std::chrono::duration<double>(t1 - t0).count()});
    t0 = t1;
  };
  const auto want = [&](const char* a) { return std::find(s.analyses.begin(), s.analyses.end(), a) != s.analyses.end(); };
  const auto with_context = [&](const char* what, auto&& f) {
    try {
      return f();
    } catch (const Error& e) {
      throw Error(e.code(), "scenario " + s.id + ", " + what + ": " + e.what());
    }
  };

  const ScenarioObjects obj = with_context("setup", [&] { return resolve(s); });
  const auto ts = s.t_grid.values();
  const double t_max = ts.back();
  stage("setup");

  std::optional<EntropyCurve> qcurve, mcurve;
  if (obj.kernel && (want("entropy-curve") || want("conditions") || want("classify") || want("bounds"))) {
    qcurve = with_context("quadrature", [&] {
      return entropy_curve_q(obj.solution, *obj.kernel, ts, s.refine, want("conditions"));
    });
    for (const auto& p : qcurve->points) man.refinement_levels.push_back(p.level);
    stage("quadrature");
  }

  std::optional<PathEnsemble> ens;
  if (s.mc) {
    // even multiples of the step, so t/2 is a recorded time as well
    const double h = t_max / double(simulation_steps(obj.model, t_max, s.mc->dt));
    SimulationPlan plan;
    for (double t : ts) {
      const double t2 = std::max(1.0, std::round(0.5 * t / h)) * h;
      plan.record_times.push_back(std::min(2.0 * t2, t_max));
      plan.record_times.push_back(t2);
    }
    plan.domains = obj.domains;
    ens = with_context("simulation", [&] { return simulate(obj.model, obj.x, t_max, *s.mc, plan); });
    stage("simulate");
    if (want("entropy-curve") || !obj.kernel) {
      std::vector<double> snapped;
      for (double t : ts) snapped.push_back(snap(*ens, t));
      mcurve = with_context("monte carlo", [&] { return entropy_curve_mc(obj.solution, *ens, snapped); });
      stage("monte-carlo");
    }
  }

  json report;
  report["scenario_id"] = s.id;
  report["model"] = obj.model.id();
  report["solution"] = obj.solution.id();
  report["kernel"] = obj.kernel ? json(obj.kernel->id()) : json(nullptr);
  report["theta"] = nullptr;
  report["growth_class"] = nullptr;
  report["slope"] = nullptr;
  report["mixed_residual"] = nullptr;
  report["bounds"] = json::object();
  report["divergence_tables"] = json::array();

  std::vector<EntropyCurve> curves;
  if (qcurve) curves.push_back(*qcurve);
  if (mcurve) curves.push_back(*mcurve);
  if (!curves.empty()) {
    std::ofstream f(out_dir + "/entropy.csv", std::ios::binary);
    write_entropy_csv(f, curves);
    man.outputs.push_back("entropy.csv");
  }
  if (qcurve && mcurve) report["max_z_score"] = num(max_z_score(*qcurve, *mcurve));

  bool super_ricci = true;
  for (double t : ts) super_ricci = super_ricci && super_ricci_gap(obj.model, t, obj.x) <= kEigenTolerance;
  report["super_ricci_verified"] = super_ricci;

  if (want("local") && ens && !obj.domains.empty()) {
    std::vector<double> snapped;
    for (double t : ts) snapped.push_back(snap(*ens, t));
    const auto tab = with_context("local entropy", [&] { return local_entropy(obj.solution, *ens, obj.domains, snapped); });
    std::ofstream f(out_dir + "/local.csv", std::ios::binary);
    write_local_csv(f, tab, *ens);
    man.outputs.push_back("local.csv");
    json loc;
    loc["monotone"] = tab.monotone();
    loc["worst_t_defect"] = num(tab.worst_t_defect);
    loc["worst_domain_defect"] = num(tab.worst_domain_defect);
    loc["E_M"] = json::array();
    for (std::size_t j = 0; j < snapped.size(); ++j) {
      loc["E_M"].push_back({{"t", snapped[j]}, {"value", num(tab.E_M[j])}, {"stderr", num(tab.E_M_stderr[j])},
                            {"stabilized", bool(tab.E_M_stabilized[j])}});
    }
    loc["exit"] = json::array();
    for (std::size_t k = 0; k < tab.domains.size(); ++k) {
      json x = estimate_json(tab.E_D_exit[k].value);
      x["domain"] = tab.domains[k].id();
      if (!tab.E_D_exit[k].error.empty()) x["error"] = tab.E_D_exit[k].error;
      loc["exit"].push_back(x);
    }
    const auto id = local_entropy_identity(obj.solution, *ens, obj.domains.front(), snapped.back());
    loc["identity"] = {{"domain", obj.domains.front().id()}, {"t", snapped.back()},
                       {"lhs", estimate_json(id.lhs)}, {"rhs", estimate_json(id.rhs)},
                       {"residual", estimate_json(id.residual)}, {"holds", id.holds()}};
    loc["exit_fisher_diagnostic"] = json::array();
    for (const auto& d : exit_fisher_diagnostic(obj.solution, *ens, obj.domains, snapped.back())) {
      loc["exit_fisher_diagnostic"].push_back(estimate_json(d));
    }
    report["local"] = loc;
    stage("local");
  }

  if (want("bounds")) {
    json b;
    b["gradient_entropy"] = json::array();
    b["submartingale"] = json::array();
    for (double t : ts) {
      json row{{"t", t}};
      if (obj.kernel) {
        const auto g = gradient_entropy_check(obj.solution, *obj.kernel, t, s.refine);
        row["quadrature"] = {{"lhs", num(g.lhs)}, {"rhs", num(g.rhs)}, {"holds", g.holds}};
        row["super_ricci"] = g.super_ricci;
      }
      if (ens) {
        const double tt = snap(*ens, t);
        const auto g = gradient_entropy_check(obj.solution, *ens, tt);
        row["monte_carlo"] = {{"lhs", num(g.lhs)}, {"rhs", num(g.rhs)}, {"stderr", num(g.rhs_stderr)}, {"holds", g.holds}};
      }
      b["gradient_entropy"].push_back(row);

      json gap{{"t", t}};
      if (obj.kernel) gap["quadrature"] = num(submartingale_gap_q(obj.solution, *obj.kernel, t, s.refine).gap);
      if (ens) {
        const double tt = snap(*ens, t);
        const auto g = submartingale_gap(obj.solution, *ens, tt);
        gap["monte_carlo"] = {{"gap", num(g.gap)}, {"stderr", num(g.std_error)}};
        gap["midpoint"] = nullptr;  // stays null when t/2 is off the step grid (odd step count at t_max)
        try {
          const auto m = submartingale_gap_midpoint(obj.solution, *ens, tt);
          gap["midpoint"] = {{"gap", num(m.gap)}, {"stderr", num(m.std_error)}};
        } catch (const Error& e) {
          if (e.code() != ErrorCode::InvalidArgument) throw;
        }
      }
      b["submartingale"].push_back(gap);
    }
    std::optional<CorollaryReport> c;
    if (obj.kernel) {
      c = corollary_bounds(obj.solution, *obj.kernel, t_max, s.delta, s.refine);
    } else if (ens) {
      const double u0 = obj.solution.value(0.0, obj.x);
      const auto ent = expect(*ens, [&](double t, const Point& y) { return u_log_u(obj.solution.value(t, y) / u0); },
                              Observation::at_time(t_max));
      c = corollary_bounds(obj.solution, obj.x, t_max, s.delta, ent);
    }
    if (c) {
      b["corollary"] = {{"t", c->t},
                        {"delta", c->delta},
                        {"grad_log", num(c->grad_log)},
                        {"normalized_entropy", num(c->normalized_entropy)},
                        {"delta_rhs", num(c->delta_rhs)},
                        {"delta_bound_holds", c->delta_bound_holds},
                        {"delta_bound_unsquared_holds", c->delta_bound_unsquared_holds},
                        {"sup_m", num(c->sup_m)},
                        {"sup_unbounded", c->sup_unbounded},
                        {"sup_rhs", num(c->sup_rhs)},
                        {"sup_bound", std::string(to_string(c->sup_bound))}};
    }
    report["bounds"] = b;
    stage("bounds");
  }

  if (want("classify")) {
    const EntropyCurve* curve = qcurve ? &*qcurve : mcurve ? &*mcurve : nullptr;
    if (curve) {
      try {
        const auto g = classify_growth(*curve, super_ricci);
        report["theta"] = num(g.theta);
        report["growth_class"] = std::string(to_string(g.growth_class));
        report["slope"] = num(g.slope);
        report["classification"] = {{"theta_infinite", g.theta_infinite}, {"fit_residual", num(g.fit_residual)},
                                    {"tol_theta", num(g.tol_theta)},       {"inconsistent", g.inconsistent},
                                    {"note", g.note}};
      } catch (const Error& e) {
        if (e.code() != ErrorCode::InsufficientCurve) throw;
        report["classification"] = {{"error", e.what()}};
      }
    }
    stage("classify");
  }

  const auto probe_t = [&] {
    std::vector<double> v;
    for (double t : linspace(0.0, t_max, 5)) {
      if (obj.solution.window().contains(t)) v.push_back(t);
    }
    return v;
  };
  if (want("separation")) {
    const auto r = with_context("separation", [&] {
      return separation_test(obj.solution, probe_t(), probe_points(obj.model, obj.x));
    });
    report["mixed_residual"] = num(r.mixed_residual);
    report["separation"] = {{"separable", r.separable},
                            {"tolerance", r.tolerance},
                            {"reconstruction_residual", num(r.reconstruction_residual)},
                            {"ode_residual", num(r.ode_residual)},
                            {"psi", r.psi_profile},
                            {"phi", r.phi_profile}};
    stage("separation");
  }

  if (want("rigidity")) {
    const auto r = rigidity_check(obj.model, obj.solution, obj.x, ts, probe_points(obj.model, obj.x));
    report["rigidity"] = {{"min_margin", num(r.min_margin)},
                          {"strictly_positive", r.strictly_positive},
                          {"entropy_known", r.entropy_known},
                          {"entropy_linear", r.entropy_linear},
                          {"linearity_residual", num(r.linearity_residual)},
                          {"max_grad_log", num(r.max_grad_log)},
                          {"assertion_triggered", r.assertion_triggered},
                          {"passes", r.passes}};
    stage("rigidity");
  }

  if (want("divergence")) {
    if (obj.model.kind() != ModelKind::PuncturedSpace3 || obj.solution.kind() != SolutionKind::RadialHarmonic3) {
      report["divergence_error"] = "divergence demo needs radial3 on punctured-3";
    } else {
      const auto r = divergence_demo(t_max);
      json rows = json::array();
      for (std::size_t i = 0; i < r.cutoffs.size(); ++i) {
        rows.push_back({{"cutoff", r.cutoffs[i]}, {"E", num(r.E_values[i])}, {"Eprime", num(r.Eprime_values[i])}});
      }
      report["divergence_tables"].push_back({{"t", r.t},
                                             {"rows", rows},
                                             {"E_spread", num(r.E_spread)},
                                             {"E_bounded", r.E_bounded},
                                             {"Eprime_status", std::string(convergence_name(r.Eprime_status))},
                                             {"Eprime_increments", r.Eprime_increments},
                                             {"predicted_increment", r.predicted_increment},
                                             {"E_tail_change", num(r.E_tail_change)},
                                             {"stable_under_mesh_halving", r.stable_under_mesh_halving}});
    }
    stage("divergence");
  }

  {
    std::ofstream f(out_dir + "/analysis.json", std::ios::binary);
    f << report.dump(2) << "\n";
    man.outputs.push_back("analysis.json");
  }
  man.outputs.push_back("manifest.json");
  json m{{"scenario_id", man.scenario_id},
         {"version", man.version},
         {"seed", man.seed ? json(hex(*man.seed)) : json(nullptr)},
         {"refine", man.refine},
         {"refinement_levels", man.refinement_levels},
         {"outputs", man.outputs},
         {"config", serialize_scenario(s)}};
  m["timings"] = json::array();
  for (const auto& st : man.timings) m["timings"].push_back({{"stage", st.stage}, {"seconds", st.seconds}});
  std::ofstream f(out_dir + "/manifest.json", std::ios::binary);
  f << m.dump(2) << "\n";
  return man;
}

RunManifest run(const std::string& config_path, const std::string& out_dir, const Overrides& o) {
  return run_scenario(apply_overrides(load_scenario(config_path), o), out_dir);
}

}  // namespace elab
