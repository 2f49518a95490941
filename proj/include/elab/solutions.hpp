#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "elab/geometry.hpp"

namespace elab {

enum class SolutionKind {
  Constant,
  ExponentialLine,
  SumOfExponentialsLine,
  CircleSpectral,
  RadialHarmonic3,
  SphereSpectral,
};

struct ExpTerm {
  double a = 1.0;
  double b = 0.0;
};

/// a * e^{k^2 s(t)} * cos(k theta + phase)
struct CircleMode {
  int k = 1;
  double amplitude = 0.0;
  double phase = 0.0;
};

/// a * e^{l(l+1) s(t)} * P_l(axis . y), a zonal harmonic about `axis`.
struct SphereMode {
  int degree = 1;
  double amplitude = 0.0;
  Vec3 axis = Vec3::UnitZ();
};

/// Value, time derivative and chart partial derivatives of u at (t, y).
struct ChartJet {
  double u = 0.0;
  double du_dt = 0.0;
  Vec du;
  Mat d2u;
};

/// Closed-form nonnegative solution of du/dt + Laplacian_{g(t)} u = 0.
class SolutionField {
 public:
  static SolutionField constant(const MetricModel& model, double c);
  static SolutionField exponential_line(const MetricModel& model, double a, double b);
  static SolutionField exponential_sum(const MetricModel& model, std::vector<ExpTerm> terms);
  static SolutionField circle_spectral(const MetricModel& model, double a0,
                                       std::vector<CircleMode> modes);
  static SolutionField radial_harmonic3(const MetricModel& model);
  static SolutionField sphere_spectral(const MetricModel& model, double a0,
                                       std::vector<SphereMode> modes);

  SolutionKind kind() const noexcept { return kind_; }
  const MetricModel& model() const noexcept { return model_; }
  /// Model window, capped where spectral sums stop being nonnegative.
  const TimeWindow& window() const noexcept { return window_; }

  double value(double t, const Point& y) const;
  ChartJet chart_jet(double t, const Point& y) const;

  bool is_constant() const noexcept;
  bool is_radial() const noexcept { return kind_ == SolutionKind::RadialHarmonic3 || is_constant(); }
  /// Largest |b| among exponential terms; drives quadrature truncation.
  double exp_growth_rate() const noexcept;

  const std::vector<ExpTerm>& exp_terms() const noexcept { return exp_; }
  double offset() const noexcept { return a0_; }
  const std::vector<CircleMode>& circle_modes() const noexcept { return circle_; }
  const std::vector<SphereMode>& sphere_modes() const noexcept { return sphere_; }

  /// Identifier in the scenario grammar, e.g. "expline:1,1".
  std::string id() const;

  /// Returns a copy scaled by factor > 0 (still a solution by linearity).
  SolutionField scaled(double factor) const;

 private:
  SolutionField(SolutionKind kind, MetricModel model);
  void require(double t, const Point& y) const;
  double min_on_grid(double t) const;
  void fix_positivity_horizon();

  SolutionKind kind_;
  MetricModel model_;
  TimeWindow window_;
  double a0_ = 0.0;
  std::vector<ExpTerm> exp_;
  std::vector<CircleMode> circle_;
  std::vector<SphereMode> sphere_;
};

SolutionField parse_solution(std::string_view id, const MetricModel& model);
std::vector<std::string> solution_catalog();

struct ValueJet {
  double u = 0.0;
  Vec grad_u;           // chart covector du
  double grad_norm_sq = 0.0;
  Mat hess_u;           // covariant Hessian
  Mat hess_log_u;
  double laplacian_u = 0.0;
  double du_dt = 0.0;
};

ValueJet eval_jet(const SolutionField& sol, double t, const Point& y, bool with_log = true);
ValueJet eval_jet(const SolutionField& sol, double t, const Point& y, const MetricData& metric,
                  bool with_log = true);

/// Pointwise integrands of the entropy functionals, built from a jet.
struct JetScalars {
  double u = 0.0;
  double u_log_u = 0.0;         // 0 log 0 := 0
  double fisher = 0.0;          // |grad u|^2 / u
  double hess_log_norm_sq = 0.0;
  double curvature_form = 0.0;  // (Ric - dg/dt / 2)(grad log u, grad log u)
  double second = 0.0;          // 2u(|Hess log u|^2 + curvature_form)
  double grad_u_log_u_sq = 0.0; // |grad(u log u)|^2
  double grad_fisher_sq = 0.0;  // |grad(|grad u|^2 / u)|^2
  double grad_u_sq = 0.0;       // |grad u|^2
  double grad_log_norm = 0.0;   // |grad log u|
};

JetScalars jet_scalars(const ValueJet& jet, const MetricData& metric);
JetScalars jet_scalars(const SolutionField& sol, double t, const Point& y);

inline double u_log_u(double u) { return u > 0.0 ? u * std::log(u) : 0.0; }

/// |du/dt + Laplacian u| with analytic space derivatives.
double backward_residual(const SolutionField& sol, double t, const Point& y);

/// Residuals of the two Bochner-type evolution identities for u log u and
/// |grad u|^2/u; heat operator applied with finite differences in t and y.
std::pair<double, double> bochner_identities(const SolutionField& sol, double t, const Point& y);

/// Laplace-Beltrami of a scalar field by fourth-order chart differences.
template <class F>
double fd_laplacian(const MetricModel& model, double t, const Point& y, F&& f, double h = 1e-3);

/// Fourth-order central time derivative (step 1e-4 * max(1, t)); lower order near the window edges.
template <class F>
double fd_time_derivative(const TimeWindow& w, double t, F&& f);

// ---------------------------------------------------------------------------

enum class KernelKind { GaussianSpace, CircleTheta, SphereSpectral };

/// Adjoint heat kernel p(t, x, .): the density of X_t w.r.t. vol_{g(t)}.
class HeatKernelField {
 public:
  HeatKernelField(KernelKind kind, MetricModel model, Point base_point);

  /// Canonical kernel of a model (errors on models without one).
  static HeatKernelField canonical(const MetricModel& model, const Point& base_point);

  KernelKind kind() const noexcept { return kind_; }
  const MetricModel& model() const noexcept { return model_; }
  const Point& base_point() const noexcept { return base_; }

  double density(double t, const Point& y) const;
  ChartPartials partials(double t, const Point& y) const;

  /// Sphere: density as a function of cos(angle to the base point); used by quadrature.
  double sphere_density_at(double t, double cos_angle) const;
  const Vec3& base_embedding() const noexcept { return base_embed_; }

  std::string id() const;

 private:
  KernelKind kind_;
  MetricModel model_;
  Point base_;
  Vec3 base_embed_ = Vec3::Zero();
};

HeatKernelField parse_kernel(std::string_view id, const MetricModel& model, const Point& base_point);

/// |dp/dt - Laplacian p + tr(dg/dt) p / 2| at (t, y).
double adjoint_residual(const HeatKernelField& kernel, double t, const Point& y);

/// Wraparound-sum density of a wrapped Gaussian with variance 2s, plus derivatives.
struct WrappedGaussian {
  double q = 0.0, dq = 0.0, d2q = 0.0;
};
WrappedGaussian wrapped_gaussian(double s, double delta);

/// Zonal heat kernel of the unit round sphere for generator Laplacian at clock s.
struct ZonalKernel {
  double k = 0.0, dk = 0.0, d2k = 0.0;  // derivatives in cos(angle)
};
ZonalKernel sphere_zonal_kernel(double s, double cos_angle);

/// Legendre P_l(x) and first two derivatives for l = 0..lmax.
void legendre_series(int lmax, double x, std::vector<double>& p, std::vector<double>& dp,
                     std::vector<double>& d2p);

}  // namespace elab

#include "elab/detail/finite_difference.hpp"
