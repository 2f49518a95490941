#pragma once

#include <string>
#include <vector>

#include "elab/solutions.hpp"

namespace elab {

struct QuadratureNode {
  Point y;
  double weight = 0.0;  // kernel density * volume element * rule weight
};

/// Hints about the integrand that shape truncation and resolution.
struct GridHints {
  double growth_rate = 0.0;  // largest |b| in e^{b y} factors of the integrands
  bool radial = false;       // integrand independent of the azimuth
  int max_mode = 0;          // highest angular frequency carried by the solution
  int mesh_level = 0;        // punctured space: extra mesh halvings at fixed cutoff
  double outer_scale = 1.0;  // multiplies the truncation radius on noncompact models
};

GridHints hints_for(const SolutionField& sol);

struct QuadratureGrid {
  int level = 0;
  double inner_cutoff = 0.0;  // punctured space only
  std::vector<QuadratureNode> nodes;
};

/// Grid for integrals against p(t, x, .) vol_{g(t)}. On the punctured space the
/// level sets the inner cutoff 10^{-2-level}; elsewhere each level halves the mesh.
QuadratureGrid build_grid(const HeatKernelField& kernel, double t, int level, const GridHints& hints);

struct Integrals {
  double mass = 0.0;
  double E = 0.0;
  double Eprime = 0.0;
  double Esecond = 0.0;
  double cond1 = 0.0;
  double cond2 = 0.0;
  double cond0a = 0.0;
};

Integrals integrate(const SolutionField& sol, const QuadratureGrid& grid, double t);
Integrals integrate(const SolutionField& sol, const HeatKernelField& kernel, double t, int level);

enum class Convergence { Stable, Divergent, Unstable };

struct RefinedValue {
  double value = 0.0;
  Convergence status = Convergence::Unstable;
  int level = 0;                // level at which the status was decided
  std::vector<double> history;  // one entry per level visited
};

struct RefinedIntegrals {
  RefinedValue mass, E, Eprime, Esecond, cond1, cond2, cond0a;
};

inline constexpr double kStableTolerance = 1e-9;
inline constexpr double kDivergentGrowth = 0.10;
inline constexpr int kDivergentRuns = 3;
inline constexpr int kMaxExtraLevels = 6;

/// Classifies a refinement sequence: Stable once |v_{k+1} - v_k| <= 1e-9 (1 + |v_{k+1}|),
/// Divergent after three successive relative increases above 10% (or a non-finite value).
RefinedValue classify_sequence(const std::vector<double>& values, int base_level);

/// Refines from base_level until every integral is Stable or Divergent, or
/// kMaxExtraLevels further levels have been visited.
RefinedIntegrals refine_integrals(const SolutionField& sol, const HeatKernelField& kernel, double t,
                                  int base_level = 0);

/// Unwraps a refined value; throws QuadratureDivergence unless Stable.
double require_stable(const RefinedValue& v, const std::string& what);

/// Total mass of p(t, x, .) vol_{g(t)}; throws QuadratureDivergence if unstable.
double kernel_mass(const HeatKernelField& kernel, double t, int base_level = 0);

/// n-point Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> x, w;
};
const GaussRule& gauss_legendre(int n);

}  // namespace elab
