#include "elab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace elab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double base_value(const SolutionField& sol, const Point& x) {
  const double u0 = sol.value(0.0, x);
  if (!(u0 > 0.0)) throw Error(ErrorCode::LogOfZero, "the estimates need u(0, x) > 0");
  return u0;
}

bool super_ricci_along(const MetricModel& model, const Point& x, double t) {
  for (double s : {0.0, 0.5 * t, t}) {
    if (super_ricci_gap(model, s, x) > kEigenTolerance) return false;
  }
  return true;
}

struct LineFit {
  double intercept = 0.0, slope = 0.0, residual = 0.0;
};

LineFit fit_line(const std::vector<double>& t, const std::vector<double>& v) {
  const double n = double(t.size());
  double st = 0, sv = 0, stt = 0, stv = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    st += t[i];
    sv += v[i];
    stt += t[i] * t[i];
    stv += t[i] * v[i];
  }
  LineFit f;
  const double den = n * stt - st * st;
  f.slope = den != 0.0 ? (n * stv - st * sv) / den : 0.0;
  f.intercept = (sv - f.slope * st) / n;
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    worst = std::max(worst, std::abs(v[i] - f.intercept - f.slope * t[i]));
    scale = std::max(scale, std::abs(v[i]));
  }
  f.residual = worst / (1.0 + scale);
  return f;
}

// Chart points covering the model, refined with `level`.
std::vector<Point> sup_points(const SolutionField& sol, int level) {
  const MetricModel& m = sol.model();
  std::vector<Point> pts;
  const int scale = 1 << level;
  switch (m.kind()) {
    case ModelKind::ConformalCircle: {
      const int n = 1024 * scale;
      for (int j = 0; j < n; ++j) pts.push_back(make_point({-kPi + 2 * kPi * j / n}));
      break;
    }
    case ModelKind::ConformalSphere2: {
      const int n_pol = 64 * scale, n_az = 128 * scale;
      std::vector<Vec3> dirs;
      for (int i = 0; i <= n_pol; ++i) {
        const double th = kPi * i / n_pol;
        for (int j = 0; j < n_az; ++j) {
          const double ph = 2 * kPi * j / n_az;
          dirs.emplace_back(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
        }
      }
      for (const auto& mode : sol.sphere_modes()) {
        dirs.push_back(mode.axis);
        dirs.push_back(-mode.axis);
      }
      for (const auto& d : dirs) {
        if (1.0 - d(2) > 1e-9) pts.push_back(sphere_chart(d));
      }
      break;
    }
    case ModelKind::HyperbolicPlaneStatic: {
      const double R = 10.0 * scale;
      const int n = 40 * scale;
      for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
          pts.push_back(make_point({-R + 2 * R * i / n, std::exp(std::log(1 / R) + 2 * std::log(R) * j / n)}));
        }
      }
      break;
    }
    default: {
      const int d = m.dim();
      const double R = 10.0 * scale;
      const double h = (d == 1 ? 0.05 : d == 2 ? 0.5 : 1.0) / scale;
      const int n = static_cast<int>(std::llround(2 * R / h));
      std::vector<int> idx(d, 0);
      for (;;) {
        Point y(d);
        for (int k = 0; k < d; ++k) y(k) = -R + h * idx[k];
        if (m.in_chart(y)) pts.push_back(y);
        int k = 0;
        while (k < d && ++idx[k] > n) idx[k++] = 0;
        if (k == d) break;
      }
    }
  }
  return pts;
}

double sup_over(const SolutionField& sol, double t, int level, const Point& x) {
  auto pts = sup_points(sol, level);
  pts.push_back(x);
  const int n_t = sol.model().dim() == 3 ? 9 : 33;
  double m = -kInf;
  for (int i = 0; i < n_t; ++i) {
    const double s = t * i / (n_t - 1);
    for (const auto& y : pts) m = std::max(m, sol.value(s, y));
  }
  return m;
}

}  // namespace

std::string_view to_string(BoundStatus s) noexcept {
  switch (s) {
    case BoundStatus::Holds: return "holds";
    case BoundStatus::Fails: return "fails";
    case BoundStatus::NotApplicable: return "not-applicable";
  }
  return "?";
}

std::string_view to_string(GrowthClass c) noexcept {
  switch (c) {
    case GrowthClass::ConstantSolution: return "constant";
    case GrowthClass::Sublinear: return "sublinear";
    case GrowthClass::Linear: return "linear";
    case GrowthClass::Superlinear: return "superlinear";
  }
  return "?";
}

GradientCheck gradient_entropy_check(const SolutionField& sol, const HeatKernelField& kernel, double t, int level) {
  const Point& x = kernel.base_point();
  const double u0 = base_value(sol, x);
  const auto j0 = jet_scalars(sol, 0.0, x);
  GradientCheck c;
  c.t = t;
  c.lhs = t * j0.grad_log_norm * j0.grad_log_norm;
  c.rhs = entropy_q(sol.scaled(1.0 / u0), kernel, t, level);
  c.holds = c.lhs <= c.rhs + 1e-9 * (1.0 + std::abs(c.rhs));
  c.super_ricci = super_ricci_along(sol.model(), x, t);
  return c;
}

GradientCheck gradient_entropy_check(const SolutionField& sol, const PathEnsemble& e, double t) {
  const Point& x = e.start();
  const double u0 = base_value(sol, x);
  const auto j0 = jet_scalars(sol, 0.0, x);
  const auto est = expect(e, [&](double s, const Point& y) { return u_log_u(sol.value(s, y) / u0); },
                          Observation::at_time(t));
  GradientCheck c;
  c.t = t;
  c.lhs = t * j0.grad_log_norm * j0.grad_log_norm;
  c.rhs = est.mean;
  c.rhs_stderr = est.std_error;
  c.holds = c.lhs <= c.rhs + 3.0 * est.std_error + 1e-12;
  c.super_ricci = super_ricci_along(sol.model(), x, t);
  return c;
}

SupEstimate grid_sup(const SolutionField& sol, double t) {
  const Point x0 = sol.model().kind() == ModelKind::ConformalSphere2 ? make_point({0.0, 0.0})
                   : sol.model().kind() == ModelKind::HyperbolicPlaneStatic ? make_point({0.0, 1.0})
                   : sol.model().kind() == ModelKind::PuncturedSpace3 ? make_point({1.0, 0.0, 0.0})
                                                                       : Point(Point::Zero(sol.model().dim()));
  const double fine = sup_over(sol, t, 1, x0);
  SupEstimate s;
  s.value = fine;
  if (!std::isfinite(fine)) {
    s.unbounded = true;
  } else if (!sol.model().is_compact()) {
    const double coarse = sup_over(sol, t, 0, x0);
    s.unbounded = fine > coarse * (1.0 + 1e-6) + 1e-12;
  }
  return s;
}

CorollaryReport corollary_bounds(const SolutionField& sol, const Point& x, double t, double delta,
                                 const Estimate& normalized_entropy) {
  if (!(t > 0.0) || !(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "corollary bounds need t, delta > 0");
  const double u0 = base_value(sol, x);
  const auto j0 = jet_scalars(sol, 0.0, x);
  CorollaryReport r;
  r.t = t;
  r.delta = delta;
  r.grad_log = j0.grad_log_norm;
  r.normalized_entropy = normalized_entropy.mean;
  r.normalized_entropy_stderr = normalized_entropy.std_error;
  r.delta_rhs = delta / (2 * t) + normalized_entropy.mean / (2 * delta);
  const double slack = 3.0 * normalized_entropy.std_error / (2 * delta) + 1e-9 * (1.0 + std::abs(r.delta_rhs));
  r.delta_bound_holds = r.grad_log * r.grad_log <= r.delta_rhs + slack;
  r.delta_bound_unsquared_holds = r.grad_log <= r.delta_rhs + slack;

  SupEstimate m = grid_sup(sol, t);
  m.value = std::max(m.value, u0);
  r.sup_m = m.value;
  r.sup_unbounded = m.unbounded;
  if (m.unbounded) {
    r.sup_rhs = kInf;
    r.sup_bound = BoundStatus::NotApplicable;
  } else {
    r.sup_rhs = std::sqrt(std::max(0.0, std::log(m.value / u0)) / t);
    r.sup_bound = r.grad_log <= r.sup_rhs + 1e-9 * (1.0 + r.sup_rhs) ? BoundStatus::Holds : BoundStatus::Fails;
  }
  return r;
}

CorollaryReport corollary_bounds(const SolutionField& sol, const HeatKernelField& kernel, double t, double delta,
                                 int level) {
  const double u0 = base_value(sol, kernel.base_point());
  Estimate ent;
  ent.mean = entropy_q(sol.scaled(1.0 / u0), kernel, t, level);
  ent.n = 1;
  return corollary_bounds(sol, kernel.base_point(), t, delta, ent);
}

GrowthReport classify_growth(const EntropyCurve& curve, bool super_ricci_verified, const GrowthTolerances& tol) {
  const auto& pts = curve.points;
  const std::size_t n = pts.size();
  if (n < 8) throw Error(ErrorCode::InsufficientCurve, "growth classification needs at least 8 points");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(pts[i].t > pts[i - 1].t)) throw Error(ErrorCode::InsufficientCurve, "curve times must increase");
  }
  if (!(pts.front().t > 0.0) || pts.back().t < 10.0 * pts.front().t * (1 - 1e-12)) {
    throw Error(ErrorCode::InsufficientCurve, "growth classification needs a decade of t");
  }
  GrowthReport r;
  r.evidence = curve;
  std::vector<double> t(n), E(n), slope(n);
  bool prime_finite = true;
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = pts[i].t;
    E[i] = pts[i].E.mean;
    slope[i] = pts[i].Eprime.mean;
    prime_finite = prime_finite && std::isfinite(slope[i]);
  }
  if (!prime_finite) {
    // divergent E': read the growth off E itself
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = i == 0 ? 0 : i - 1, b = i == 0 ? 1 : i;
      slope[i] = (E[b] - E[a]) / (t[b] - t[a]);
    }
    r.note = "E' divergent (integrability conditions fail); slopes from differences of E";
  }

  const std::size_t first = (2 * n) / 3;
  double sum = 0.0;
  for (std::size_t i = first; i < n; ++i) sum += slope[i];
  r.theta = sum / double(n - first);
  r.tol_theta = tol.theta_rel * (1.0 + std::abs(E.back()) / t.back());

  std::size_t decade = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (t[i] <= t.back() / 10.0 * (1 + 1e-12)) decade = i;
  }
  if (slope.back() > r.tol_theta && slope.back() >= 2.0 * slope[decade] && slope[decade] >= 0.0) {
    r.theta_infinite = true;
    r.theta = kInf;
  }

  const LineFit fit = fit_line(t, E);
  r.slope = fit.slope;
  r.fit_residual = fit.residual;
  const double max_slope = *std::max_element(slope.begin(), slope.end());
  const double lin_tol = tol.linear_rel * (1.0 + std::abs(r.theta_infinite ? 0.0 : r.theta));

  bool flat = !r.theta_infinite, curvature_small = true;
  for (std::size_t i = 0; i < n; ++i) {
    flat = flat && std::abs(slope[i] - r.theta) <= lin_tol;
    if (std::isfinite(pts[i].Esecond.mean)) curvature_small = curvature_small && std::abs(pts[i].Esecond.mean) <= lin_tol;
  }

  if (prime_finite && r.theta <= r.tol_theta && max_slope <= r.tol_theta) {
    r.growth_class = GrowthClass::ConstantSolution;
  } else if (flat && curvature_small && fit.residual <= tol.linear_rel) {
    r.growth_class = GrowthClass::Linear;
  } else if (r.theta_infinite || slope.back() - slope.front() > lin_tol) {
    r.growth_class = GrowthClass::Superlinear;
  } else {
    r.growth_class = GrowthClass::Sublinear;
    if (r.theta <= r.tol_theta) {
      if (prime_finite) {
        r.inconsistent = super_ricci_verified;
        r.note = "sublinear growth of a nonconstant solution";
      }
    } else if (r.note.empty()) {
      r.note = "E' decreasing toward theta > 0";
    }
  }
  return r;
}

SeparationReport separation_test(const SolutionField& sol, const std::vector<double>& t_grid,
                                 const std::vector<Point>& y_grid, double tolerance) {
  if (t_grid.size() < 2 || y_grid.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "separation test needs at least a 2 x 2 grid");
  }
  const std::size_t nt = t_grid.size(), ny = y_grid.size();
  std::vector<std::vector<double>> u(nt, std::vector<double>(ny));
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      u[i][j] = sol.value(t_grid[i], y_grid[j]);
      if (!(u[i][j] > 0.0)) throw Error(ErrorCode::LogOfZero, "separation test needs u > 0 on the grid");
    }
  }
  SeparationReport r;
  r.tolerance = tolerance;
  for (std::size_t i = 0; i + 1 < nt; ++i) {
    for (std::size_t j = 0; j + 1 < ny; ++j) {
      const double d = std::log(u[i + 1][j + 1]) - std::log(u[i + 1][j]) - std::log(u[i][j + 1]) + std::log(u[i][j]);
      r.mixed_residual = std::max(r.mixed_residual, std::abs(d));
    }
  }
  r.separable = r.mixed_residual <= tolerance;

  const double norm = std::sqrt(u[0][0]);
  for (std::size_t j = 0; j < ny; ++j) r.psi_profile.push_back(u[0][j] / norm);
  for (std::size_t i = 0; i < nt; ++i) r.phi_profile.push_back(u[i][0] / norm);
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      r.reconstruction_residual = std::max(
          r.reconstruction_residual, std::abs(r.psi_profile[j] * r.phi_profile[i] - u[i][j]) / (1.0 + u[i][j]));
    }
  }

  r.ode_residual = kNaN;
  if (r.separable) {
    r.ode_residual = 0.0;
    for (std::size_t i = 0; i < nt; ++i) {
      const auto jt = eval_jet(sol, t_grid[i], y_grid[0], false);
      const double phi_rate = jt.du_dt / jt.u;
      for (std::size_t j = 0; j < ny; ++j) {
        const auto jy = eval_jet(sol, t_grid[0], y_grid[j], false);
        r.ode_residual = std::max(r.ode_residual, std::abs(phi_rate + jy.laplacian_u / jy.u));
      }
    }
  }
  return r;
}

RigidityReport rigidity_check(const MetricModel& model, const SolutionField& sol, const Point& x,
                              const std::vector<double>& t_grid, const std::vector<Point>& y_grid) {
  RigidityReport r;
  r.min_margin = kInf;
  for (double t : t_grid) {
    for (const auto& y : y_grid) {
      r.min_margin = std::min(r.min_margin, super_ricci_margin(model, t, y));
      r.max_grad_log = std::max(r.max_grad_log, jet_scalars(sol, t, y).grad_log_norm);
    }
  }
  r.strictly_positive = r.min_margin > 1e-9;

  std::vector<double> ts, es;
  try {
    const auto kernel = HeatKernelField::canonical(model, x);
    for (double t : t_grid) {
      if (!(t > 0.0)) continue;
      ts.push_back(t);
      es.push_back(entropy_q(sol, kernel, t));
    }
    r.entropy_known = ts.size() >= 3;
  } catch (const Error& err) {
    if (err.code() != ErrorCode::ConfigError) throw;
  }
  if (r.entropy_known) {
    r.linearity_residual = fit_line(ts, es).residual;
    r.entropy_linear = r.linearity_residual <= 1e-8;
  }
  r.assertion_triggered = r.strictly_positive && r.entropy_linear;
  r.passes = !r.assertion_triggered || r.max_grad_log <= 1e-8;
  return r;
}

DivergenceReport divergence_demo(double t, int n_cutoffs) {
  if (n_cutoffs < 2) throw Error(ErrorCode::InvalidArgument, "divergence demo needs at least two cutoffs");
  const auto model = MetricModel::punctured_space3();
  const auto sol = SolutionField::radial_harmonic3(model);
  const Point x = make_point({1.0, 0.0, 0.0});
  const auto kernel = HeatKernelField::canonical(model, x);
  const GridHints hints = hints_for(sol);

  DivergenceReport r;
  r.t = t;
  const auto series = [&](const GridHints& h, std::vector<double>& E, std::vector<double>& Ep,
                          std::vector<double>* cut) {
    for (int level = 0; level < n_cutoffs; ++level) {
      const auto grid = build_grid(kernel, t, level, h);
      const auto I = integrate(sol, grid, t);
      E.push_back(I.E);
      Ep.push_back(I.Eprime);
      if (cut) cut->push_back(grid.inner_cutoff);
    }
  };
  series(hints, r.E_values, r.Eprime_values, &r.cutoffs);
  const auto [lo, hi] = std::minmax_element(r.E_values.begin(), r.E_values.end());
  r.E_spread = *hi - *lo;
  r.E_bounded = r.E_spread <= 1e-4;
  r.Eprime_status = classify_sequence(r.Eprime_values, 0).status;
  for (std::size_t i = 1; i < r.Eprime_values.size(); ++i) {
    r.Eprime_increments.push_back(r.Eprime_values[i] - r.Eprime_values[i - 1]);
  }
  r.predicted_increment = 4 * kPi * std::log(10.0) * std::pow(4 * kPi * t, -1.5) * std::exp(-1.0 / (4 * t));

  GridHints wide = hints;
  wide.outer_scale = 2.0;
  r.E_outer_doubled = integrate(sol, build_grid(kernel, t, n_cutoffs - 1, wide), t).E;
  r.E_tail_change = std::abs(r.E_outer_doubled - r.E_values.back());

  GridHints fine = hints;
  fine.mesh_level = 1;
  std::vector<double> E2, Ep2;
  series(fine, E2, Ep2, nullptr);
  const auto [lo2, hi2] = std::minmax_element(E2.begin(), E2.end());
  r.stable_under_mesh_halving =
      ((*hi2 - *lo2) <= 1e-4) == r.E_bounded && classify_sequence(Ep2, 0).status == r.Eprime_status;
  return r;
}

}  // namespace elab
