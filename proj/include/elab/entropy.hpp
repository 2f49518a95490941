#pragma once

#include <optional>
#include <string>
#include <vector>

#include "elab/quadrature.hpp"
#include "elab/stochastic.hpp"

namespace elab {

enum class Method { Quadrature, MonteCarlo };

/// A condition integral; `divergent` set when refinement never stabilized.
struct ConditionValue {
  double value = 0.0;  // +inf when divergent
  bool divergent = false;
};

struct Conditions {
  ConditionValue cond1;   // |grad(u log u)|^2
  ConditionValue cond2;   // |grad(|grad u|^2 / u)|^2
  ConditionValue cond0a;  // |grad u|^2
  bool finite() const noexcept { return !cond1.divergent && !cond2.divergent && !cond0a.divergent; }
};

// Quadrature against the kernel measure. Each refines until Stable and throws
// QuadratureDivergence otherwise; the kernel mass is checked at t as well.
double entropy_q(const SolutionField& sol, const HeatKernelField& kernel, double t, int level = 0);
double entropy_prime_q(const SolutionField& sol, const HeatKernelField& kernel, double t, int level = 0);
double entropy_second_q(const SolutionField& sol, const HeatKernelField& kernel, double t, int level = 0);
Conditions conditions(const SolutionField& sol, const HeatKernelField& kernel, double t, int level = 0);

/// E at one fixed refinement level, no convergence loop (used for finite differences).
double entropy_at_level(const SolutionField& sol, const HeatKernelField& kernel, double t, int level);

// Monte Carlo over an ensemble started at the kernel's base point.
Estimate entropy_mc(const SolutionField& sol, const PathEnsemble& e, double t);
Estimate entropy_prime_mc(const SolutionField& sol, const PathEnsemble& e, double t);
Estimate entropy_second_mc(const SolutionField& sol, const PathEnsemble& e, double t);

struct CurvePoint {
  double t = 0.0;
  Method method = Method::Quadrature;
  Estimate E, Eprime, Esecond;  // std_error 0 for quadrature
  std::optional<Conditions> conditions;
  int level = 0;  // refinement level E settled at (quadrature)
};

struct EntropyCurve {
  std::vector<CurvePoint> points;

  std::vector<double> times() const;
};

EntropyCurve entropy_curve_q(const SolutionField& sol, const HeatKernelField& kernel,
                             const std::vector<double>& t_grid, int level = 0, bool with_conditions = true);
EntropyCurve entropy_curve_mc(const SolutionField& sol, const PathEnsemble& e, const std::vector<double>& t_grid);

/// Largest |E_q - E_mc| / stderr over matching times of two curves.
double max_z_score(const EntropyCurve& quadrature, const EntropyCurve& monte_carlo);

// ---------------------------------------------------------------------------
// Local entropies along the process stopped at the first exit from D.

struct ExitEntry {
  Estimate value;      // E[(u log u)(tau_D, X_tau)] over exited paths
  std::string error;   // non-empty (e.g. CensoredDominates) when not estimable
};

struct LocalEntropyTable {
  std::vector<DomainSpec> domains;       // nested, innermost first
  std::vector<double> t_grid;
  std::vector<std::vector<Estimate>> E_D;  // [domain][t]
  std::vector<ExitEntry> E_D_exit;       // per domain
  std::vector<double> E_M;               // per t: largest-domain value
  std::vector<double> E_M_stderr;
  std::vector<bool> E_M_stabilized;      // |E_{D_m} - E_{D_{m-1}}| <= 3 paired stderr

  // Worst monotonicity defects in units of paired stderr (<= 3 passes).
  double worst_t_defect = 0.0;
  double worst_domain_defect = 0.0;
  bool monotone() const noexcept { return worst_t_defect <= 3.0 && worst_domain_defect <= 3.0; }
};

LocalEntropyTable local_entropy(const SolutionField& sol, const PathEnsemble& e,
                                const std::vector<DomainSpec>& domains, const std::vector<double>& t_grid);

/// Paired check of a stopped Ito identity
///   E[F(t^tau, X)] - F(0, x) = E[int_0^{t^tau} G(s, X_s) ds]
/// with the time integral taken by the trapezoid rule on the recorded times
/// (the last partial interval ends at the exit state).
struct StoppedIdentity {
  Estimate lhs, rhs;
  Estimate residual;  // per-path lhs - rhs
  bool holds() const noexcept { return std::abs(residual.mean) <= 3.0 * residual.std_error + 1e-12; }
};

/// F = u log u, G = |grad u|^2 / u.
StoppedIdentity local_entropy_identity(const SolutionField& sol, const PathEnsemble& e, const DomainSpec& d,
                                       double t);
/// F = |grad u|^2 / u, G = the second-derivative integrand 2u(|Hess log u|^2 + (Ric - g'/2)(.,.)).
StoppedIdentity stopped_second_identity(const SolutionField& sol, const PathEnsemble& e, const DomainSpec& d,
                                        double t);

// ---------------------------------------------------------------------------
// N_s = (t - s) |grad u|^2/u (s, X_s) + (u log u)(s, X_s).

struct GapEstimate {
  double gap = 0.0;
  double std_error = 0.0;
};

/// E[N_t] - E[N_0].
GapEstimate submartingale_gap(const SolutionField& sol, const PathEnsemble& e, double t);
/// E[N_t] - E[N_{t/2}], paired per path; t/2 must be a recorded time.
GapEstimate submartingale_gap_midpoint(const SolutionField& sol, const PathEnsemble& e, double t);
GapEstimate submartingale_gap_q(const SolutionField& sol, const HeatKernelField& kernel, double t, int level = 0);

/// Diagnostic only: E[(|grad u|^2/u)(tau_n, X_tau_n) 1{tau_n <= t}] along nested domains.
std::vector<Estimate> exit_fisher_diagnostic(const SolutionField& sol, const PathEnsemble& e,
                                             const std::vector<DomainSpec>& domains, double t);

}  // namespace elab
