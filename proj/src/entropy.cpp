#include "elab/entropy.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace elab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMassTolerance = 1e-6;

RefinedIntegrals refined(const SolutionField& sol, const HeatKernelField& kernel, double t, int level) {
  if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "quadrature entropies need t > 0");
  auto r = refine_integrals(sol, kernel, t, level);
  const double mass = require_stable(r.mass, "kernel mass");
  if (std::abs(mass - 1.0) > kMassTolerance) {
    std::ostringstream os;
    os << "kernel " << kernel.id() << " has mass " << mass << " at t = " << t;
    throw Error(ErrorCode::QuadratureDivergence, os.str());
  }
  return r;
}

ConditionValue condition_value(const RefinedValue& v) {
  // Unstable sequences never settled either; both are reported as +inf.
  if (v.status == Convergence::Stable) return {v.value, false};
  return {kInf, true};
}

double value_or_inf(const RefinedValue& v) { return v.status == Convergence::Stable ? v.value : kInf; }

Estimate exact(double v) {
  Estimate e;
  e.mean = v;
  e.n = 1;
  return e;
}

// Monotonicity defect of a paired difference, in stderr units (0 when nonnegative).
double defect(const Estimate& d) {
  if (!(d.mean < 0.0)) return 0.0;
  if (d.std_error == 0.0) return d.mean < -1e-12 ? kInf : 0.0;
  return -d.mean / d.std_error;
}

std::vector<double> difference(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

void require_path(const PathEnsemble& e, std::size_t p, double until) {
  if (e.blowup_time(p) <= until) {
    std::ostringstream os;
    os << "path " << p << " left the chart at t = " << e.blowup_time(p);
    throw Error(ErrorCode::BlowUp, os.str());
  }
}

using Scalar = double (*)(const JetScalars&);

StoppedIdentity stopped_identity(const SolutionField& sol, const PathEnsemble& e, const DomainSpec& d, double t,
                                 Scalar F, Scalar G) {
  const auto& times = e.times();
  const std::size_t ti = e.time_index(t);
  const double tt = times[ti];
  const auto rec = e.exits(d);
  const auto F_at = [&](double s, const Point& y) { return F(jet_scalars(sol, s, y)); };
  const auto G_at = [&](double s, const Point& y) { return G(jet_scalars(sol, s, y)); };
  const Point x0 = e.start();
  const double F0 = F_at(0.0, x0);
  const double G0 = G_at(0.0, x0);

  std::vector<double> lhs(e.n_paths()), rhs(e.n_paths()), res(e.n_paths());
  for (std::size_t p = 0; p < e.n_paths(); ++p) {
    const ExitRecord& r = rec[p];
    if (r.status == ExitStatus::StartedOutside) {
      lhs[p] = rhs[p] = res[p] = 0.0;
      continue;
    }
    const bool stopped = r.status == ExitStatus::Exited && r.tau <= tt;
    const double stop = stopped ? r.tau : tt;
    require_path(e, p, stop);
    double acc = 0.0, g_prev = G0, s_prev = 0.0;
    for (std::size_t i = 1; i <= ti; ++i) {
      if (times[i] > stop * (1 + 1e-12) + 1e-15) break;
      const double g = G_at(times[i], e.chart(e.state(p, i)));
      acc += 0.5 * (g_prev + g) * (times[i] - s_prev);
      g_prev = g;
      s_prev = times[i];
    }
    double end = 0.0;
    if (stopped) {
      const Point y = e.chart(r.state);
      if (r.tau > s_prev) acc += 0.5 * (g_prev + G_at(r.tau, y)) * (r.tau - s_prev);
      end = F_at(r.tau, y);
    } else {
      end = F_at(tt, e.chart(e.state(p, ti)));
    }
    lhs[p] = end - F0;
    rhs[p] = acc;
    res[p] = lhs[p] - rhs[p];
  }
  return {summarize(lhs), summarize(rhs), summarize(res)};
}

}  // namespace

double entropy_q(const SolutionField& sol, const HeatKernelField& kernel, double t, int level) {
  return require_stable(refined(sol, kernel, t, level).E, "entropy");
}

double entropy_prime_q(const SolutionField& sol, const HeatKernelField& kernel, double t, int level) {
  return require_stable(refined(sol, kernel, t, level).Eprime, "entropy first derivative");
}

double entropy_second_q(const SolutionField& sol, const HeatKernelField& kernel, double t, int level) {
  return require_stable(refined(sol, kernel, t, level).Esecond, "entropy second derivative");
}

Conditions conditions(const SolutionField& sol, const HeatKernelField& kernel, double t, int level) {
  const auto r = refined(sol, kernel, t, level);
  return {condition_value(r.cond1), condition_value(r.cond2), condition_value(r.cond0a)};
}

double entropy_at_level(const SolutionField& sol, const HeatKernelField& kernel, double t, int level) {
  return integrate(sol, kernel, t, level).E;
}

Estimate entropy_mc(const SolutionField& sol, const PathEnsemble& e, double t) {
  return expect(e, [&](double s, const Point& y) { return u_log_u(sol.value(s, y)); }, Observation::at_time(t));
}

Estimate entropy_prime_mc(const SolutionField& sol, const PathEnsemble& e, double t) {
  return expect(e, [&](double s, const Point& y) { return jet_scalars(sol, s, y).fisher; },
                Observation::at_time(t));
}

Estimate entropy_second_mc(const SolutionField& sol, const PathEnsemble& e, double t) {
  return expect(e, [&](double s, const Point& y) { return jet_scalars(sol, s, y).second; },
                Observation::at_time(t));
}

std::vector<double> EntropyCurve::times() const {
  std::vector<double> t;
  t.reserve(points.size());
  for (const auto& p : points) t.push_back(p.t);
  return t;
}

EntropyCurve entropy_curve_q(const SolutionField& sol, const HeatKernelField& kernel,
                             const std::vector<double>& t_grid, int level, bool with_conditions) {
  EntropyCurve c;
  for (double t : t_grid) {
    const auto r = refined(sol, kernel, t, level);
    CurvePoint pt;
    pt.t = t;
    pt.method = Method::Quadrature;
    pt.E = exact(require_stable(r.E, "entropy"));
    pt.Eprime = exact(value_or_inf(r.Eprime));
    pt.Esecond = exact(value_or_inf(r.Esecond));
    pt.level = r.E.level;
    if (with_conditions) pt.conditions = Conditions{condition_value(r.cond1), condition_value(r.cond2),
                                                    condition_value(r.cond0a)};
    c.points.push_back(pt);
  }
  return c;
}

EntropyCurve entropy_curve_mc(const SolutionField& sol, const PathEnsemble& e, const std::vector<double>& t_grid) {
  EntropyCurve c;
  for (double t : t_grid) {
    CurvePoint pt;
    pt.t = t;
    pt.method = Method::MonteCarlo;
    pt.E = entropy_mc(sol, e, t);
    pt.Eprime = entropy_prime_mc(sol, e, t);
    pt.Esecond = entropy_second_mc(sol, e, t);
    c.points.push_back(pt);
  }
  return c;
}

double max_z_score(const EntropyCurve& quadrature, const EntropyCurve& monte_carlo) {
  double worst = 0.0;
  for (const auto& q : quadrature.points) {
    for (const auto& m : monte_carlo.points) {
      if (std::abs(q.t - m.t) > 1e-12 * (1 + q.t)) continue;
      const double d = std::abs(q.E.mean - m.E.mean);
      worst = std::max(worst, m.E.std_error > 0 ? d / m.E.std_error : (d > 0 ? kInf : 0.0));
    }
  }
  return worst;
}

LocalEntropyTable local_entropy(const SolutionField& sol, const PathEnsemble& e,
                                const std::vector<DomainSpec>& domains, const std::vector<double>& t_grid) {
  if (domains.empty()) throw Error(ErrorCode::InvalidArgument, "local entropy needs at least one domain");
  LocalEntropyTable tab;
  tab.domains = domains;
  tab.t_grid = t_grid;
  const Observable f = [&](double s, const Point& y) { return u_log_u(sol.value(s, y)); };

  std::vector<std::vector<std::vector<double>>> v(domains.size());
  for (std::size_t k = 0; k < domains.size(); ++k) {
    tab.E_D.emplace_back();
    for (double t : t_grid) {
      v[k].push_back(sample_values(e, f, Observation::stopped(t, domains[k])));
      tab.E_D[k].push_back(summarize(v[k].back()));
    }
    ExitEntry x;
    try {
      x.value = summarize(sample_values(e, f, Observation::at_exit(domains[k])));
    } catch (const Error& err) {
      if (err.code() != ErrorCode::CensoredDominates) throw;
      x.error = err.what();
      std::size_t censored = 0;
      for (const auto& r : e.exits(domains[k])) censored += r.status == ExitStatus::Censored;
      x.value.mean = std::numeric_limits<double>::quiet_NaN();
      x.value.censored_fraction = double(censored) / double(e.n_paths());
    }
    tab.E_D_exit.push_back(x);
  }

  for (std::size_t k = 0; k < domains.size(); ++k) {
    for (std::size_t j = 1; j < t_grid.size(); ++j) {
      tab.worst_t_defect = std::max(tab.worst_t_defect, defect(summarize(difference(v[k][j], v[k][j - 1]))));
    }
    if (k == 0) continue;
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
      tab.worst_domain_defect = std::max(tab.worst_domain_defect, defect(summarize(difference(v[k][j], v[k - 1][j]))));
    }
  }

  const std::size_t m = domains.size() - 1;
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    tab.E_M.push_back(tab.E_D[m][j].mean);
    tab.E_M_stderr.push_back(tab.E_D[m][j].std_error);
    bool stable = false;
    if (m > 0) {
      const Estimate d = summarize(difference(v[m][j], v[m - 1][j]));
      stable = std::abs(d.mean) <= 3.0 * d.std_error + 1e-12;
    }
    tab.E_M_stabilized.push_back(stable);
  }
  return tab;
}

StoppedIdentity local_entropy_identity(const SolutionField& sol, const PathEnsemble& e, const DomainSpec& d,
                                       double t) {
  return stopped_identity(sol, e, d, t, [](const JetScalars& j) { return j.u_log_u; },
                          [](const JetScalars& j) { return j.fisher; });
}

StoppedIdentity stopped_second_identity(const SolutionField& sol, const PathEnsemble& e, const DomainSpec& d,
                                        double t) {
  return stopped_identity(sol, e, d, t, [](const JetScalars& j) { return j.fisher; },
                          [](const JetScalars& j) { return j.second; });
}

GapEstimate submartingale_gap(const SolutionField& sol, const PathEnsemble& e, double t) {
  const auto j0 = jet_scalars(sol, 0.0, e.start());
  const Estimate Nt = entropy_mc(sol, e, t);
  return {Nt.mean - (t * j0.fisher + j0.u_log_u), Nt.std_error};
}

GapEstimate submartingale_gap_midpoint(const SolutionField& sol, const PathEnsemble& e, double t) {
  const std::size_t ti = e.time_index(t), hi = e.time_index(0.5 * t);
  const double tt = e.times()[ti], th = e.times()[hi];
  std::vector<double> d(e.n_paths());
  for (std::size_t p = 0; p < e.n_paths(); ++p) {
    require_path(e, p, tt);
    const auto jh = jet_scalars(sol, th, e.chart(e.state(p, hi)));
    d[p] = u_log_u(sol.value(tt, e.chart(e.state(p, ti)))) - ((tt - th) * jh.fisher + jh.u_log_u);
  }
  const Estimate s = summarize(d);
  return {s.mean, s.std_error};
}

GapEstimate submartingale_gap_q(const SolutionField& sol, const HeatKernelField& kernel, double t, int level) {
  const auto j0 = jet_scalars(sol, 0.0, kernel.base_point());
  return {entropy_q(sol, kernel, t, level) - (t * j0.fisher + j0.u_log_u), 0.0};
}

std::vector<Estimate> exit_fisher_diagnostic(const SolutionField& sol, const PathEnsemble& e,
                                             const std::vector<DomainSpec>& domains, double t) {
  std::vector<Estimate> out;
  for (const auto& d : domains) {
    const auto rec = e.exits(d);
    std::vector<double> v(e.n_paths(), 0.0);
    for (std::size_t p = 0; p < e.n_paths(); ++p) {
      const ExitRecord& r = rec[p];
      if (r.status == ExitStatus::Censored || r.tau > t) continue;
      require_path(e, p, r.tau);
      v[p] = jet_scalars(sol, r.tau, e.chart(r.state)).fisher;
    }
    out.push_back(summarize(v));
  }
  return out;
}

}  // namespace elab
