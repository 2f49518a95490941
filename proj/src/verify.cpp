#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <ostream>

#include "elab/harness.hpp"
#include "elab/rng.hpp"

namespace elab {

namespace {

constexpr double pi = std::numbers::pi;

std::string fmt(const char* f, double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}
std::string f7(double v) { return fmt("%.7f", v); }
std::string e3(double v) { return fmt("%.3e", v); }
std::string pm(const Estimate& e) { return fmt("%.5f", e.mean) + " +- " + fmt("%.1e", e.std_error); }
std::string tstr(double t) { return fmt("%g", t); }

struct Builder {
  CriterionResult r;
  void row(std::string name, std::string measured, std::string target, bool pass) {
    r.rows.push_back({std::move(name), std::move(measured), std::move(target), pass});
  }
};

SdeConfig mc(std::size_t n, double dt, Scheme scheme = Scheme::EulerMaruyama) {
  SdeConfig c;
  c.n_paths = n;
  c.dt = dt;
  c.scheme = scheme;
  return c;
}

std::vector<DomainSpec> line_domains() {
  std::vector<DomainSpec> d;
  for (int n = 1; n <= 4; ++n) d.push_back(DomainSpec::interval(-n, n));
  return d;
}

PathEnsemble line_paths(std::vector<DomainSpec> domains) {
  SimulationPlan plan;
  plan.record_times = {0.25, 0.5, 1.0, 2.0, 4.0};
  plan.domains = std::move(domains);
  return simulate(MetricModel::euclidean_line(), make_point({0.0}), 4.0, mc(100000, 1e-3), plan);
}

// Line ensemble shared by the criteria that use Monte Carlo on the real line.
const PathEnsemble& line_ensemble() {
  static const PathEnsemble e = line_paths({});
  return e;
}

struct Case {
  std::string label;
  MetricModel model;
  std::string solution;
  Point x;
  bool has_kernel = true;
};

std::vector<Case> matrix() {
  const auto line = MetricModel::euclidean_line();
  const auto circle = MetricModel::conformal_circle(1, 0);
  const auto shrink = MetricModel::conformal_circle(1, -0.1);
  const auto sphere = MetricModel::conformal_sphere2(1, 2);
  const auto space = MetricModel::euclidean_space(3);
  const auto p3 = MetricModel::punctured_space3();
  const auto hyp = MetricModel::hyperbolic_plane_static();
  return {
      {"line expline:1,1", line, "expline:1,1", make_point({0.0})},
      {"line expline:2,3", line, "expline:2,3", make_point({0.0})},
      {"line expline:0.5,1", line, "expline:0.5,1", make_point({0.0})},
      {"line expsum:1,1;1,2", line, "expsum:1,1;1,2", make_point({0.2})},
      {"line const:5", line, "const:5", make_point({0.0})},
      {"static circle", circle, "circle-spec:2,(1,0.5)", make_point({0.0})},
      {"shrinking circle", shrink, "circle-spec:2,(1,0.5)", make_point({0.0})},
      {"Ricci-flow sphere", sphere, "sphere-spec:2,(1,0.5)", make_point({0.3, -0.4})},
      {"space3 const", space, "const:1", make_point({0.0, 0.0, 0.0})},
      {"punctured radial3", p3, "radial3", make_point({1.0, 0.0, 0.0})},
      {"hyperbolic const", hyp, "const:2", make_point({0.0, 1.0}), false},
  };
}

// Ensemble for a matrix case: the shared one on the line at x = 0, otherwise
// 2e4 paths to t = 1 recording {0.5, 1} (and 0.25 for midpoints).
std::shared_ptr<const PathEnsemble> case_ensemble(const Case& c) {
  static std::map<std::string, std::shared_ptr<const PathEnsemble>> cache;
  if (c.model.kind() == ModelKind::EuclideanLine && c.x(0) == 0.0) {
    return {&line_ensemble(), [](const PathEnsemble*) {}};
  }
  const std::string key = c.model.id() + "@" + std::to_string(c.x(0));
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  SimulationPlan plan;
  plan.record_times = {0.25, 0.5, 1.0};
  auto e = std::make_shared<const PathEnsemble>(
      simulate(c.model, c.x, 1.0, mc(20000, 1e-3, default_scheme(c.model)), plan));
  cache[key] = e;
  return e;
}

std::vector<double> log_grid(double a, double b, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(a * std::pow(b / a, double(i) / (n - 1)));
  return v;
}

CriterionResult c1() {
  Builder b;
  b.r.title = "exact entropy E(t) = t for u = exp(y - t)";
  const auto start = std::chrono::steady_clock::now();
  const auto line = MetricModel::euclidean_line();
  const auto u = parse_solution("expline:1,1", line);
  const auto k = HeatKernelField::canonical(line, make_point({0.0}));
  for (double t : {0.25, 1.0, 4.0}) {
    const double q = entropy_q(u, k, t);
    b.row("E(" + tstr(t) + ")", f7(q), "vs " + tstr(t) + " (tol 1e-8)", std::abs(q - t) <= 1e-8);
  }
  const auto& e = line_ensemble();
  for (double t : {0.25, 1.0, 4.0}) {
    const auto m = entropy_mc(u, e, t);
    b.row("E_mc(" + tstr(t) + ")", pm(m), "vs " + tstr(t) + " (3 stderr)", std::abs(m.mean - t) <= 3 * m.std_error);
    b.row("stderr E_mc(" + tstr(t) + ")", e3(m.std_error), "<= 1e-2", m.std_error <= 1e-2);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  b.row("runtime", fmt("%.1f s", secs), "< 30 s", secs < 30.0);
  return b.r;
}

CriterionResult c2() {
  Builder b;
  b.r.title = "condition integrals for u = exp(y - t)";
  const auto line = MetricModel::euclidean_line();
  const auto u = parse_solution("expline:1,1", line);
  const auto k = HeatKernelField::canonical(line, make_point({0.0}));
  for (double t : {0.5, 1.0, 2.0}) {
    const auto c = conditions(u, k, t);
    const double o1 = (9 * t * t + 8 * t + 1) * std::exp(2 * t), o2 = std::exp(2 * t);
    const double r1 = std::abs(c.cond1.value / o1 - 1), r2 = std::abs(c.cond2.value / o2 - 1);
    b.row("cond1(" + tstr(t) + ") rel err", e3(r1), "<= 1e-6", !c.cond1.divergent && r1 <= 1e-6);
    b.row("cond2(" + tstr(t) + ") rel err", e3(r2), "<= 1e-6", !c.cond2.divergent && r2 <= 1e-6);
  }
  return b.r;
}

CriterionResult c3() {
  Builder b;
  b.r.title = "exponential family E(t) = a (log a + b^2 t), linear growth";
  const auto line = MetricModel::euclidean_line();
  const auto k = HeatKernelField::canonical(line, make_point({0.0}));
  for (auto [a, bb] : {std::pair{2.0, 3.0}, std::pair{0.5, 1.0}}) {
    const auto u = SolutionField::exponential_line(line, a, bb);
    const std::string tag = "(" + tstr(a) + "," + tstr(bb) + ")";
    for (double t : {0.25, 1.0, 4.0}) {
      const double q = entropy_q(u, k, t), o = a * (std::log(a) + bb * bb * t);
      b.row("E" + tag + "(" + tstr(t) + ")", f7(q), "vs " + f7(o) + " (tol 1e-8)", std::abs(q - o) <= 1e-8);
    }
    const auto g = classify_growth(entropy_curve_q(u, k, log_grid(0.25, 4.0, 16), 0, false), true);
    b.row("class" + tag, std::string(to_string(g.growth_class)), "== linear", g.growth_class == GrowthClass::Linear);
    b.row("slope" + tag, fmt("%.9f", g.slope), "vs " + tstr(a * bb * bb) + " (tol 1e-6)",
          std::abs(g.slope - a * bb * bb) <= 1e-6);
  }
  return b.r;
}

CriterionResult c4() {
  Builder b;
  b.r.title = "derivative formulas vs central differences";
  const double h = 1e-3;
  for (const auto& c : matrix()) {
    if (!c.has_kernel) continue;
    const auto u = parse_solution(c.solution, c.model);
    const auto k = HeatKernelField::canonical(c.model, c.x);
    double d1 = 0.0, d2 = 0.0;
    bool finite = true;
    for (double t : {0.25, 0.5, 1.0}) {
      if (!conditions(u, k, t).finite()) {
        finite = false;
        break;
      }
      const int lvl = refine_integrals(u, k, t).E.level;
      const double em = entropy_at_level(u, k, t - h, lvl), e0 = entropy_at_level(u, k, t, lvl),
                   ep = entropy_at_level(u, k, t + h, lvl);
      d1 = std::max(d1, std::abs((ep - em) / (2 * h) - entropy_prime_q(u, k, t)));
      d2 = std::max(d2, std::abs((ep - 2 * e0 + em) / (h * h) - entropy_second_q(u, k, t)));
    }
    if (!finite) continue;  // conditions infinite: outside the criterion
    b.row(c.label + " max |dE - E'|", e3(d1), "<= 1e-5", d1 <= 1e-5);
    b.row(c.label + " max |d2E - E''|", e3(d2), "<= 1e-4", d2 <= 1e-4);
  }
  return b.r;
}

CriterionResult c5() {
  Builder b;
  b.r.title = "monotonicity and convexity under super Ricci flow";
  for (const auto& c : matrix()) {
    if (!c.has_kernel) continue;
    const auto u = parse_solution(c.solution, c.model);
    // 16-point log grid on [0.1, 2], cut back inside a positivity horizon
    const auto ts = log_grid(0.1, std::min(2.0, 0.95 * u.window().t_max), 16);
    bool verified = true;
    for (double t : ts) verified = verified && super_ricci_gap(c.model, t, c.x) <= kEigenTolerance;
    if (!verified) continue;
    const auto k = HeatKernelField::canonical(c.model, c.x);
    if (!conditions(u, k, ts.front()).finite()) continue;
    const auto curve = entropy_curve_q(u, k, ts, 0, false);
    double m1 = INFINITY, m2 = INFINITY;
    for (const auto& p : curve.points) {
      m1 = std::min(m1, std::isfinite(p.Eprime.mean) ? p.Eprime.mean : -INFINITY);
      m2 = std::min(m2, std::isfinite(p.Esecond.mean) ? p.Esecond.mean : -INFINITY);
    }
    b.row(c.label + " monotonicity min E'", e3(m1), ">= -1e-10", m1 >= -1e-10);
    b.row(c.label + " convexity min E''", e3(m2), ">= -1e-10", m2 >= -1e-10);
  }
  return b.r;
}

CriterionResult c6() {
  Builder b;
  b.r.title = "submartingale gap E[N_t] - E[N_0]";
  for (const auto& c : matrix()) {
    const auto u = parse_solution(c.solution, c.model);
    if (c.has_kernel) {
      const auto k = HeatKernelField::canonical(c.model, c.x);
      if (conditions(u, k, 1.0).finite()) {
        double worst = INFINITY;
        for (double t : {0.5, 1.0}) worst = std::min(worst, submartingale_gap_q(u, k, t).gap);
        b.row(c.label + " quadrature min gap", e3(worst), ">= -1e-9", worst >= -1e-9);
      }
    }
    if (c.model.kind() == ModelKind::PuncturedSpace3) continue;
    const auto e = case_ensemble(c);
    double worst = INFINITY;
    for (double t : {0.5, 1.0}) {
      for (const auto& g : {submartingale_gap(u, *e, t), submartingale_gap_midpoint(u, *e, t)}) {
        worst = std::min(worst, g.std_error > 0 ? g.gap / g.std_error : (g.gap >= 0 ? 0.0 : -INFINITY));
      }
    }
    b.row(c.label + " MC min gap/stderr", fmt("%.2f", worst), ">= -3", worst >= -3.0);
  }
  const auto line = MetricModel::euclidean_line();
  const auto u = parse_solution("expline:1,1", line);
  const auto k = HeatKernelField::canonical(line, make_point({0.0}));
  for (double t : {1.0, 4.0}) {
    const auto q = submartingale_gap_q(u, k, t);
    b.row("saturation quadrature gap(" + tstr(t) + ")", e3(q.gap), "|.| <= 1e-8", std::abs(q.gap) <= 1e-8);
    const auto m = submartingale_gap(u, line_ensemble(), t);
    b.row("saturation MC gap(" + tstr(t) + ")", pm(Estimate{m.gap, m.std_error, 0, 0}), "|.| <= 3 stderr",
          std::abs(m.gap) <= 3 * m.std_error);
  }
  return b.r;
}

CriterionResult c7() {
  Builder b;
  b.r.title = "gradient-entropy estimate t |grad log u|^2 <= E[(u/u0) log(u/u0)]";
  for (const auto& c : matrix()) {
    const auto u = parse_solution(c.solution, c.model);
    if (c.has_kernel && c.model.kind() != ModelKind::PuncturedSpace3) {
      const auto k = HeatKernelField::canonical(c.model, c.x);
      double margin = INFINITY;
      bool ok = true;
      for (double t : {0.5, 1.0}) {
        const auto g = gradient_entropy_check(u, k, t);
        margin = std::min(margin, g.rhs - g.lhs);
        ok = ok && g.holds;
      }
      b.row(c.label + " quadrature min rhs - lhs", e3(margin), ">= 0 (rel slack 1e-9)", ok);
    }
    if (c.model.kind() == ModelKind::PuncturedSpace3) continue;
    const auto e = case_ensemble(c);
    double worst = INFINITY;
    for (double t : {0.5, 1.0}) {
      const auto g = gradient_entropy_check(u, *e, t);
      worst = std::min(worst, g.rhs_stderr > 0 ? (g.rhs - g.lhs) / g.rhs_stderr : (g.rhs >= g.lhs ? 0.0 : -INFINITY));
    }
    b.row(c.label + " MC min (rhs - lhs)/stderr", fmt("%.2f", worst), ">= -3", worst >= -3.0);
  }
  const auto line = MetricModel::euclidean_line();
  const auto u = parse_solution("expline:1,1", line);
  const auto k = HeatKernelField::canonical(line, make_point({0.0}));
  for (double t : {0.5, 1.0, 2.0}) {
    const auto g = gradient_entropy_check(u, k, t);
    b.row("saturation lhs(" + tstr(t) + ")", f7(g.lhs), "vs " + tstr(t) + " (tol 1e-6)", std::abs(g.lhs - t) <= 1e-6);
    b.row("saturation rhs(" + tstr(t) + ")", f7(g.rhs), "vs " + tstr(t) + " (tol 1e-6)", std::abs(g.rhs - t) <= 1e-6);
  }
  return b.r;
}

CriterionResult c8() {
  Builder b;
  b.r.title = "local entropy monotone in t and in nested domains";
  const auto line = MetricModel::euclidean_line();
  const auto u = parse_solution("expline:1,1", line);
  const std::vector<double> ts = {0.25, 0.5, 1.0, 2.0, 4.0};
  const auto tab = local_entropy(u, line_paths(line_domains()), line_domains(), ts);
  b.row("worst defect in t (stderr units)", fmt("%.2f", tab.worst_t_defect), "<= 3", tab.worst_t_defect <= 3.0);
  b.row("worst defect in D (stderr units)", fmt("%.2f", tab.worst_domain_defect), "<= 3",
        tab.worst_domain_defect <= 3.0);
  const auto& d4 = tab.E_D[3][2];
  b.row("E_D4(1)", pm(d4), "vs 1 (3 stderr)", std::abs(d4.mean - 1.0) <= 3 * d4.std_error);
  return b.r;
}

CriterionResult c9() {
  Builder b;
  b.r.title = "punctured space: bounded entropy, divergent E'";
  const auto r = divergence_demo(1.0, 4);
  b.row("E(1) spread over cutoffs 1e-2..1e-5", e3(r.E_spread), "<= 1e-4", r.E_spread <= 1e-4);
  double min_growth = INFINITY;
  for (std::size_t i = 1; i < r.Eprime_values.size(); ++i) {
    min_growth = std::min(min_growth, r.Eprime_values[i] / r.Eprime_values[i - 1] - 1.0);
  }
  b.row("E' min growth per refinement", fmt("%.3f", min_growth), "> 0.10", min_growth > 0.10);
  b.row("E' status", r.Eprime_status == Convergence::Divergent ? "divergent" : "not divergent", "== divergent",
        r.Eprime_status == Convergence::Divergent);
  return b.r;
}

CriterionResult c10() {
  Builder b;
  b.r.title = "Brownian marginals: N(0, 2t) on the line, time-changed wrapped Gaussian on the shrinking circle";
  const auto& e = line_ensemble();
  for (double t : {0.25, 1.0}) {
    const auto x = sample_values(e, [](double, const Point& y) { return y(0); }, Observation::at_time(t));
    const double ks = ks_statistic(x, [t](double v) { return 0.5 * std::erfc(-v / std::sqrt(4 * t)); });
    b.row("KS vs N(0," + tstr(2 * t) + ")", fmt("%.5f", ks), "< " + fmt("%.5f", ks_critical_1pct(x.size())),
          ks < ks_critical_1pct(x.size()));
  }
  const auto shrink = MetricModel::conformal_circle(1, -0.1);
  SimulationPlan plan;
  plan.record_times = {0.5, 1.0};
  const auto ce = simulate(shrink, make_point({0.0}), 1.0, mc(100000, 1e-3), plan);
  for (double t : {0.5, 1.0}) {
    const double s = -10 * std::log(1 - 0.1 * t);
    for (int k : {1, 2}) {
      const auto m = expect(ce, [k](double, const Point& y) { return std::cos(k * y(0)); }, Observation::at_time(t));
      const double o = std::exp(-double(k * k) * s);
      b.row("E cos(" + std::to_string(k) + " theta)(" + tstr(t) + ")", pm(m), "vs " + fmt("%.5f", o) + " (3 stderr)",
            std::abs(m.mean - o) <= 3 * m.std_error);
    }
  }
  return b.r;
}

CriterionResult c11() {
  Builder b;
  b.r.title = "separation of variables";
  std::vector<double> ts;
  for (int i = 0; i < 5; ++i) ts.push_back(0.25 * i);
  const auto ys = [](const Point& x) {
    std::vector<Point> v;
    for (int j = 0; j < 9; ++j) {
      Point y = x;
      y(0) += -1.0 + 0.25 * j;
      v.push_back(y);
    }
    return v;
  };
  const auto line = MetricModel::euclidean_line();
  const auto p3 = MetricModel::punctured_space3();
  const std::vector<std::pair<SolutionField, Point>> products = {
      {parse_solution("expline:1,1", line), make_point({0.0})},
      {parse_solution("expline:2,3", line), make_point({0.0})},
      {parse_solution("expline:0.5,1", line), make_point({0.0})},
      {parse_solution("const:5", line), make_point({0.0})},
      {parse_solution("radial3", p3), make_point({2.0, 0.0, 0.0})},
  };
  for (const auto& [u, x] : products) {
    const auto r = separation_test(u, ts, ys(x));
    b.row(u.id() + " mixed residual", e3(r.mixed_residual), "<= 1e-12", r.mixed_residual <= 1e-12);
    b.row(u.id() + " ode residual", e3(r.ode_residual), "<= 1e-10", r.ode_residual <= 1e-10);
  }
  const auto w = separation_test(parse_solution("expsum:1,1;1,2", line), ts, ys(make_point({0.0})));
  b.row("witness expsum:1,1;1,2 mixed residual", e3(w.mixed_residual), ">= 0.01", w.mixed_residual >= 0.01);
  b.row("witness separable", w.separable ? "yes" : "no", "== no", !w.separable);
  return b.r;
}

Point sample_point(const MetricModel& m, PathStream& s, std::uint64_t& n) {
  const auto uni = [&](double a, double b) { return a + (b - a) * s.uniform(n++); };
  switch (m.kind()) {
    case ModelKind::ConformalCircle: return make_point({uni(-pi, pi)});
    case ModelKind::HyperbolicPlaneStatic: return make_point({uni(-1.5, 1.5), uni(0.2, 2.0)});
    default: break;
  }
  Point y(m.dim());
  for (int i = 0; i < m.dim(); ++i) y(i) = uni(-1.5, 1.5);
  if (m.kind() == ModelKind::PuncturedSpace3 && y.norm() < 0.3) y(0) += 1.0;
  return y;
}

CriterionResult c12() {
  Builder b;
  b.r.title = "Bochner identities at random samples";
  std::uint64_t idx = 0;
  for (const auto& c : matrix()) {
    const auto u = parse_solution(c.solution, c.model);
    const TimeWindow w = u.window();
    PathStream s(kDefaultSeed, idx++, PathStream::Increments);
    std::uint64_t n = 0;
    double r1 = 0.0, r2 = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double t0 = w.t_min + 0.01, t1 = std::min(w.t_max, 2.0) - 0.01;
      const double t = t0 + (t1 - t0) * s.uniform(n++);
      const auto [a, bb] = bochner_identities(u, t, sample_point(c.model, s, n));
      r1 = std::max(r1, a);
      r2 = std::max(r2, bb);
    }
    b.row(c.label + " max residual1", e3(r1), "<= 1e-6", r1 <= 1e-6);
    b.row(c.label + " max residual2", e3(r2), "<= 1e-6", r2 <= 1e-6);
  }
  return b.r;
}

}  // namespace

bool CriterionResult::pass() const {
  return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const CriterionRow& r) { return r.pass; });
}

Suite parse_suite(std::string_view name) {
  if (name == "paper-examples") return Suite::Examples;
  if (name == "properties") return Suite::Properties;
  if (name == "all") return Suite::All;
  throw Error(ErrorCode::ConfigError, "unknown suite '" + std::string(name) + "' (paper-examples | properties | all)");
}

std::vector<int> suite_criteria(Suite s) {
  switch (s) {
    case Suite::Examples: return {1, 2, 3, 9, 11};
    case Suite::Properties: return {4, 5, 6, 7, 8, 10, 12};
    case Suite::All: break;
  }
  return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
}

CriterionResult run_criterion(int number) {
  static const std::function<CriterionResult()> table[] = {c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11, c12};
  if (number < 1 || number > 12) throw Error(ErrorCode::InvalidArgument, "criteria are numbered 1..12");
  const auto start = std::chrono::steady_clock::now();
  CriterionResult r;
  try {
    r = table[number - 1]();
  } catch (const Error& e) {
    r.rows.push_back({"error", e.what(), "no error", false});
  }
  r.number = number;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

int verify(Suite s, std::ostream& out) {
  bool all = true;
  for (int n : suite_criteria(s)) {
    const auto r = run_criterion(n);
    all = all && r.pass();
    out << "[" << n << "] " << r.title << " (" << fmt("%.1f", r.seconds) << " s)\n";
    for (const auto& row : r.rows) {
      out << "    " << row.name << " = " << row.measured << " " << row.target << " " << (row.pass ? "PASS" : "FAIL")
          << "\n";
    }
    out << "  criterion " << n << ": " << (r.pass() ? "PASS" : "FAIL") << "\n";
    out.flush();
  }
  out << (all ? "ALL PASS" : "SOME CRITERIA FAILED") << "\n";
  return all ? 0 : 1;
}

}  // namespace elab
