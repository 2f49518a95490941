#pragma once

#include <string>
#include <vector>

#include "elab/entropy.hpp"

namespace elab {

// ---------------------------------------------------------------------------
// t |grad u / u|^2 (0, x) <= E[(u(t, X_t)/u(0, x)) log(u(t, X_t)/u(0, x))]

struct GradientCheck {
  double t = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double rhs_stderr = 0.0;  // 0 for quadrature
  bool holds = false;       // lhs <= rhs + 3 stderr (+ 1e-9 relative slack for quadrature)
  bool super_ricci = false; // gap <= 0 verified along (s, x), s in [0, t]
};

GradientCheck gradient_entropy_check(const SolutionField& sol, const HeatKernelField& kernel, double t,
                                     int level = 0);
GradientCheck gradient_entropy_check(const SolutionField& sol, const PathEnsemble& e, double t);

enum class BoundStatus { Holds, Fails, NotApplicable };
std::string_view to_string(BoundStatus s) noexcept;

struct CorollaryReport {
  double t = 0.0, delta = 0.0;
  double grad_log = 0.0;            // |grad u / u| (0, x)
  double normalized_entropy = 0.0;  // E[(u/u0) log(u/u0)]
  double normalized_entropy_stderr = 0.0;
  double delta_rhs = 0.0;           // delta/(2t) + entropy/(2 delta)
  bool delta_bound_holds = false;   // |grad u/u|^2 <= delta_rhs, as stated
  bool delta_bound_unsquared_holds = false;  // |grad u/u| <= delta_rhs, the AM-GM consequence
  double sup_m = 0.0;               // sup of u over [0, t] x grid
  bool sup_unbounded = false;       // grid sup grew under refinement
  double sup_rhs = 0.0;             // t^{-1/2} sqrt(log(m / u0))
  BoundStatus sup_bound = BoundStatus::NotApplicable;
};

/// Both corollary forms given the normalized entropy (quadrature or Monte Carlo).
CorollaryReport corollary_bounds(const SolutionField& sol, const Point& x, double t, double delta,
                                 const Estimate& normalized_entropy);
CorollaryReport corollary_bounds(const SolutionField& sol, const HeatKernelField& kernel, double t, double delta,
                                 int level = 0);

/// Sup of u over [0, t] x (dense grid or truncation box). `unbounded` when the
/// value grows under box doubling / mesh halving.
struct SupEstimate {
  double value = 0.0;
  bool unbounded = false;
};
SupEstimate grid_sup(const SolutionField& sol, double t);

// ---------------------------------------------------------------------------

enum class GrowthClass { ConstantSolution, Sublinear, Linear, Superlinear };
std::string_view to_string(GrowthClass c) noexcept;

struct GrowthTolerances {
  double theta_rel = 1e-4;   // tol_theta = theta_rel (1 + |E(t_max)| / t_max)
  double linear_rel = 1e-3;  // linearity residual, relative
};

struct GrowthReport {
  double theta = 0.0;
  bool theta_infinite = false;
  GrowthClass growth_class = GrowthClass::Sublinear;
  double slope = 0.0;         // least-squares slope of E(t)
  double fit_residual = 0.0;  // max |E - fit| / (1 + max |E|)
  double tol_theta = 0.0;
  bool inconsistent = false;  // nonconstant sublinear growth under verified super Ricci flow
  std::string note;
  EntropyCurve evidence;
};

/// Needs >= 8 points over at least a decade of t (else InsufficientCurve).
GrowthReport classify_growth(const EntropyCurve& curve, bool super_ricci_verified = false,
                             const GrowthTolerances& tol = {});

// ---------------------------------------------------------------------------

struct SeparationReport {
  double mixed_residual = 0.0;  // max |D_t D_y log u| over grid cells
  bool separable = false;       // mixed_residual <= tolerance
  double tolerance = 1e-10;
  std::vector<double> psi_profile;  // psi(y_j) = u(t0, y_j) / sqrt(u(t0, y0))
  std::vector<double> phi_profile;  // phi(t_i) = u(t_i, y0) / sqrt(u(t0, y0))
  double reconstruction_residual = 0.0;  // max |psi phi - u| / (1 + |u|)
  double ode_residual = 0.0;             // max |phi'/phi + Laplacian psi / psi|; NaN unless separable
};

SeparationReport separation_test(const SolutionField& sol, const std::vector<double>& t_grid,
                                 const std::vector<Point>& y_grid, double tolerance = 1e-10);

// ---------------------------------------------------------------------------

struct RigidityReport {
  double min_margin = 0.0;      // min eigenvalue of 2 Ric - dg/dt over the grid
  bool strictly_positive = false;
  bool entropy_linear = false;  // E(t) affine within tolerance on t_grid
  bool entropy_known = false;   // false when no kernel is available
  double linearity_residual = 0.0;
  double max_grad_log = 0.0;    // max |grad log u| over the grid
  bool assertion_triggered = false;
  bool passes = true;           // !triggered || max_grad_log <= tolerance
};

RigidityReport rigidity_check(const MetricModel& model, const SolutionField& sol, const Point& x,
                              const std::vector<double>& t_grid, const std::vector<Point>& y_grid);

// ---------------------------------------------------------------------------

struct DivergenceReport {
  double t = 0.0;
  std::vector<double> cutoffs;
  std::vector<double> E_values;
  std::vector<double> Eprime_values;
  double E_spread = 0.0;  // max - min of E over cutoffs
  bool E_bounded = false; // spread <= 1e-4
  Convergence Eprime_status = Convergence::Unstable;
  std::vector<double> Eprime_increments;
  double predicted_increment = 0.0;  // 4 pi ln 10 p(t, x, 0) per decade
  double E_outer_doubled = 0.0;
  double E_tail_change = 0.0;
  bool stable_under_mesh_halving = false;
};

/// Radial harmonic 1/|y| on the punctured space from x = (1, 0, 0).
DivergenceReport divergence_demo(double t, int n_cutoffs = 4);

}  // namespace elab
