#include "elab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace elab {

namespace {

constexpr int kOrder = 20;
constexpr double kPi = std::numbers::pi;

GaussRule make_gauss(int n) {
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 1; k < n; ++k) {
        const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) {
        r.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        break;
      }
      r.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    r.x[i] = x;
  }
  return r;
}

// Composite Gauss-Legendre nodes and weights on [a, b] split at `breaks`.
void composite(const std::vector<double>& breaks, std::vector<double>& x, std::vector<double>& w) {
  const GaussRule& g = gauss_legendre(kOrder);
  x.clear();
  w.clear();
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double a = breaks[p], b = breaks[p + 1];
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < kOrder; ++i) {
      x.push_back(mid + half * g.x[i]);
      w.push_back(half * g.w[i]);
    }
  }
}

std::vector<double> uniform_breaks(double a, double b, double max_width) {
  const int n = std::max(1, static_cast<int>(std::ceil((b - a) / max_width)));
  std::vector<double> br(n + 1);
  for (int i = 0; i <= n; ++i) br[i] = a + (b - a) * i / n;
  return br;
}

double truncation_radius(double t, double growth) {
  const double b = 2.0 * growth;  // covers squared integrands such as cond1
  return std::max(8.0 * std::sqrt(4.0 * t), 4.0 * t * b + std::sqrt(16.0 * t * t * b * b + 240.0 * t));
}

// Orthonormal pair spanning the plane orthogonal to the unit vector a.
std::pair<Vec3, Vec3> frame(const Vec3& a) {
  const Vec3 helper = std::abs(a(0)) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 e1 = (helper - helper.dot(a) * a).normalized();
  return {e1, a.cross(e1)};
}

void check_time(const HeatKernelField& kernel, double t) {
  kernel.model().require_time(t);
  if (!(t > 0.0)) throw Error(ErrorCode::OutOfWindow, "kernel integrals need t > 0");
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_gauss(n)).first;
  return it->second;
}

GridHints hints_for(const SolutionField& sol) {
  GridHints h;
  h.growth_rate = sol.exp_growth_rate();
  h.radial = sol.is_radial();
  for (const auto& m : sol.circle_modes()) h.max_mode = std::max(h.max_mode, m.k);
  for (const auto& m : sol.sphere_modes()) h.max_mode = std::max(h.max_mode, m.degree);
  return h;
}

QuadratureGrid build_grid(const HeatKernelField& kernel, double t, int level, const GridHints& hints) {
  check_time(kernel, t);
  if (level < 0) throw Error(ErrorCode::InvalidArgument, "refinement level must be >= 0");
  const MetricModel& model = kernel.model();
  const Point& x = kernel.base_point();
  const double refine = std::ldexp(1.0, -level);
  QuadratureGrid grid;
  grid.level = level;
  std::vector<double> rx, rw, ax, aw;

  switch (model.kind()) {
    case ModelKind::EuclideanLine:
    case ModelKind::EuclideanSpace: {
      const int n = model.dim();
      const double R = truncation_radius(t, hints.growth_rate) * hints.outer_scale;
      const double width = 0.5 * std::sqrt(2.0 * t) * refine;
      if (n == 1) {
        composite(uniform_breaks(x(0) - R, x(0) + R, width), rx, rw);
        for (std::size_t i = 0; i < rx.size(); ++i) {
          const Point y = make_point({rx[i]});
          grid.nodes.push_back({y, kernel.density(t, y) * rw[i]});
        }
        break;
      }
      composite(uniform_breaks(0.0, R, width), rx, rw);
      const int n_az = hints.radial ? 1 : static_cast<int>(64 / refine);
      if (n == 2) {
        for (std::size_t i = 0; i < rx.size(); ++i) {
          for (int j = 0; j < n_az; ++j) {
            const double phi = 2.0 * kPi * (j + 0.5) / n_az;
            const Point y = x + rx[i] * make_point({std::cos(phi), std::sin(phi)});
            grid.nodes.push_back({y, kernel.density(t, y) * rx[i] * rw[i] * 2.0 * kPi / n_az});
          }
        }
        break;
      }
      if (hints.radial) {
        ax = {0.0};
        aw = {2.0};
      } else {
        composite(uniform_breaks(-1.0, 1.0, 0.5 * refine), ax, aw);
      }
      for (std::size_t i = 0; i < rx.size(); ++i) {
        for (std::size_t k = 0; k < ax.size(); ++k) {
          const double st = std::sqrt(std::max(0.0, 1.0 - ax[k] * ax[k]));
          for (int j = 0; j < n_az; ++j) {
            const double phi = 2.0 * kPi * (j + 0.5) / n_az;
            const Point y = x + rx[i] * make_point({st * std::cos(phi), st * std::sin(phi), ax[k]});
            grid.nodes.push_back(
                {y, kernel.density(t, y) * rx[i] * rx[i] * rw[i] * aw[k] * 2.0 * kPi / n_az});
          }
        }
      }
      break;
    }

    case ModelKind::PuncturedSpace3: {
      // Spherical coordinates about the puncture with the polar axis through x.
      const double rho = x.norm();
      const Vec3 axis = Vec3(x(0), x(1), x(2)) / rho;
      const auto [e1, e2] = frame(axis);
      const double delta = std::pow(10.0, -2.0 - level);
      grid.inner_cutoff = delta;
      const double R = truncation_radius(t, hints.growth_rate) * hints.outer_scale;
      const double r1 = 0.5 * rho;
      const double r_max = rho + R;
      const double mesh = std::ldexp(1.0, -hints.mesh_level);
      std::vector<double> breaks;
      if (delta < r1) {
        const int decades = static_cast<int>(std::ceil(2.0 * std::log10(r1 / delta) / mesh));
        for (int i = 0; i < decades; ++i) breaks.push_back(delta * std::pow(r1 / delta, double(i) / decades));
        for (double b : uniform_breaks(r1, r_max, 0.5 * std::sqrt(2.0 * t) * mesh)) breaks.push_back(b);
      } else {
        breaks = uniform_breaks(delta, std::max(r_max, 2.0 * delta), 0.5 * std::sqrt(2.0 * t) * mesh);
      }
      composite(breaks, rx, rw);
      const double angular = std::sqrt(4.0 * t / (rho * r_max));
      composite(uniform_breaks(0.0, kPi, std::min(kPi / 8.0, 0.5 * angular) * mesh), ax, aw);
      const int n_az = hints.radial ? 1 : 64;
      for (std::size_t i = 0; i < rx.size(); ++i) {
        for (std::size_t k = 0; k < ax.size(); ++k) {
          const double ca = std::cos(ax[k]), sa = std::sin(ax[k]);
          for (int j = 0; j < n_az; ++j) {
            const double phi = 2.0 * kPi * (j + 0.5) / n_az;
            const Vec3 v = rx[i] * (ca * axis + sa * (std::cos(phi) * e1 + std::sin(phi) * e2));
            const Point y = make_point({v(0), v(1), v(2)});
            const double vol = rx[i] * rx[i] * sa * rw[i] * aw[k] * 2.0 * kPi / n_az;
            grid.nodes.push_back({y, kernel.density(t, y) * vol});
          }
        }
      }
      break;
    }

    case ModelKind::ConformalCircle: {
      const double s = model.clock(t);
      const double base = std::max({256.0, 16.0 * hints.max_mode, std::ceil(2.0 * kPi / (0.25 * std::sqrt(2.0 * s)))});
      const int n = static_cast<int>(base / refine);
      for (int j = 0; j < n; ++j) {
        const double d = 2.0 * kPi * j / n;
        // p = q / sqrt(c) and vol = sqrt(c) dtheta
        grid.nodes.push_back({make_point({x(0) + d}), wrapped_gaussian(s, d).q * 2.0 * kPi / n});
      }
      break;
    }

    case ModelKind::ConformalSphere2: {
      const double s = model.clock(t);
      const Vec3 b = kernel.base_embedding();
      const auto [e1, e2] = frame(b);
      composite(uniform_breaks(0.0, kPi, std::min(kPi / 8.0, 0.5 * std::sqrt(2.0 * s)) * refine), ax, aw);
      const int n_az = static_cast<int>(std::max(64, 4 * hints.max_mode) / refine);
      for (std::size_t k = 0; k < ax.size(); ++k) {
        const double ca = std::cos(ax[k]), sa = std::sin(ax[k]);
        // p = K / c and vol = c * vol_round
        const double radial_weight = sphere_zonal_kernel(s, ca).k * sa * aw[k] * 2.0 * kPi / n_az;
        for (int j = 0; j < n_az; ++j) {
          const double phi = 2.0 * kPi * (j + 0.5) / n_az;
          const Vec3 v = ca * b + sa * (std::cos(phi) * e1 + std::sin(phi) * e2);
          if (1.0 - v(2) < 1e-13) continue;  // measure-zero chart gap at the north pole
          grid.nodes.push_back({sphere_chart(v), radial_weight});
        }
      }
      break;
    }

    case ModelKind::HyperbolicPlaneStatic:
      throw Error(ErrorCode::InvalidArgument, "no kernel quadrature on " + model.id());
  }
  return grid;
}

Integrals integrate(const SolutionField& sol, const QuadratureGrid& grid, double t) {
  const MetricModel& model = sol.model();
  const std::size_t n = grid.nodes.size();
  // Fixed chunking keeps the summation order independent of the thread count.
  constexpr std::size_t kChunks = 64;
  std::vector<Integrals> partial(kChunks);
  std::vector<std::exception_ptr> errors(kChunks);
  const auto work = [&](std::size_t c) {
    try {
      Integrals acc;
      const std::size_t lo = n * c / kChunks, hi = n * (c + 1) / kChunks;
      for (std::size_t i = lo; i < hi; ++i) {
        const auto& node = grid.nodes[i];
        const MetricData m = metric_at(model, t, node.y);
        const JetScalars s = jet_scalars(eval_jet(sol, t, node.y, m, false), m);
        const double w = node.weight;
        acc.mass += w;
        acc.E += w * s.u_log_u;
        acc.Eprime += w * s.fisher;
        acc.Esecond += w * s.second;
        acc.cond1 += w * s.grad_u_log_u_sq;
        acc.cond2 += w * s.grad_fisher_sq;
        acc.cond0a += w * s.grad_u_sq;
      }
      partial[c] = acc;
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  const unsigned n_threads = n < 4096 ? 1u : std::max(1u, std::min(16u, std::thread::hardware_concurrency()));
  if (n_threads == 1) {
    for (std::size_t c = 0; c < kChunks; ++c) work(c);
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < n_threads; ++k) {
      pool.emplace_back([&, k] {
        for (std::size_t c = k; c < kChunks; c += n_threads) work(c);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  Integrals total;
  for (const auto& p : partial) {
    total.mass += p.mass;
    total.E += p.E;
    total.Eprime += p.Eprime;
    total.Esecond += p.Esecond;
    total.cond1 += p.cond1;
    total.cond2 += p.cond2;
    total.cond0a += p.cond0a;
  }
  return total;
}

Integrals integrate(const SolutionField& sol, const HeatKernelField& kernel, double t, int level) {
  if (!(sol.model() == kernel.model())) {
    throw Error(ErrorCode::InvalidArgument, "solution and kernel live on different models");
  }
  return integrate(sol, build_grid(kernel, t, level, hints_for(sol)), t);
}

RefinedValue classify_sequence(const std::vector<double>& v, int base_level) {
  RefinedValue out;
  out.history = v;
  if (v.empty()) return out;
  int run = 0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    out.level = base_level + static_cast<int>(k);
    out.value = v[k];
    if (!std::isfinite(v[k])) {
      out.status = Convergence::Divergent;
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
    if (k == 0) continue;
    if (std::abs(v[k] - v[k - 1]) <= kStableTolerance * (1.0 + std::abs(v[k]))) {
      out.status = Convergence::Stable;
      return out;
    }
    if (v[k - 1] > 0.0 && v[k] > (1.0 + kDivergentGrowth) * v[k - 1]) {
      if (++run >= kDivergentRuns) {
        out.status = Convergence::Divergent;
        out.value = std::numeric_limits<double>::infinity();
        return out;
      }
    } else {
      run = 0;
    }
  }
  out.status = Convergence::Unstable;
  return out;
}

RefinedIntegrals refine_integrals(const SolutionField& sol, const HeatKernelField& kernel, double t,
                                  int base_level) {
  std::array<std::vector<double>, 7> h;
  RefinedIntegrals out;
  std::array<RefinedValue*, 7> slots{&out.mass, &out.E, &out.Eprime, &out.Esecond,
                                     &out.cond1, &out.cond2, &out.cond0a};
  for (int level = base_level; level <= base_level + kMaxExtraLevels; ++level) {
    const Integrals I = integrate(sol, kernel, t, level);
    const std::array<double, 7> vals{I.mass, I.E, I.Eprime, I.Esecond, I.cond1, I.cond2, I.cond0a};
    bool done = true;
    for (int q = 0; q < 7; ++q) {
      h[q].push_back(vals[q]);
      *slots[q] = classify_sequence(h[q], base_level);
      done = done && slots[q]->status != Convergence::Unstable;
    }
    if (done) break;
  }
  return out;
}

double require_stable(const RefinedValue& v, const std::string& what) {
  if (v.status == Convergence::Stable) return v.value;
  std::ostringstream os;
  os << what << " did not stabilize under refinement ("
     << (v.status == Convergence::Divergent ? "divergent" : "unstable") << "; history";
  for (double x : v.history) os << ' ' << x;
  os << ')';
  throw Error(ErrorCode::QuadratureDivergence, os.str());
}

double kernel_mass(const HeatKernelField& kernel, double t, int base_level) {
  std::vector<double> h;
  RefinedValue v;
  for (int level = base_level; level <= base_level + kMaxExtraLevels; ++level) {
    double mass = 0.0;
    GridHints hints;
    hints.radial = true;  // every grid is polar about an axis of symmetry of the kernel
    for (const auto& node : build_grid(kernel, t, level, hints).nodes) mass += node.weight;
    h.push_back(mass);
    v = classify_sequence(h, base_level);
    if (v.status != Convergence::Unstable) break;
  }
  return require_stable(v, "kernel mass");
}

}  // namespace elab
