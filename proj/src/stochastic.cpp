#include "elab/stochastic.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <exception>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include "elab/rng.hpp"
#include "parse_util.hpp"

namespace elab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kBlowUpRadius = 1e-8;

double wrap_angle(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r;
}

bool is_full_circle(const MetricModel& m, const DomainSpec& d) {
  return m.kind() == ModelKind::ConformalCircle && d.b - d.a >= kTwoPi;
}

// Isotropic diffusion scale sigma^2 (per unit dt of the generator) at a stored state,
// in the units of domain_depth.
double local_variance(const MetricModel& m, const DomainSpec& d, double t, const Vec& s) {
  switch (m.kind()) {
    case ModelKind::ConformalCircle: return 1.0 / m.conformal(t);
    case ModelKind::HyperbolicPlaneStatic: return s(1) * s(1);
    case ModelKind::ConformalSphere2: {
      if (d.kind == DomainSpec::Kind::Cap) return 1.0 / m.conformal(t);
      const Point z = sphere_chart(Vec3(s(0), s(1), s(2)));
      const double f = 0.5 * (1.0 + z.squaredNorm());
      return f * f / m.conformal(t);
    }
    default: return 1.0;
  }
}

// Boundary point of d nearest to a stored state (used as the exit location).
Vec project_to_boundary(const MetricModel& m, const DomainSpec& d, const Vec& s) {
  Vec out = s;
  switch (d.kind) {
    case DomainSpec::Kind::Interval: {
      if (m.kind() == ModelKind::ConformalCircle) {
        const double len = d.b - d.a;
        const double rel = wrap_angle(s(0) - d.a);
        const double to_a = rel <= len ? rel : kTwoPi - rel;  // distance back to a
        const double to_b = rel <= len ? len - rel : rel - len;
        out(0) = to_a <= to_b ? (rel <= len ? s(0) - rel : s(0) + (kTwoPi - rel)) : (rel <= len ? s(0) + to_b : s(0) - to_b);
      } else {
        out(0) = std::abs(s(0) - d.a) <= std::abs(s(0) - d.b) ? d.a : d.b;
      }
      break;
    }
    case DomainSpec::Kind::Ball: {
      Point y = s;
      if (m.kind() == ModelKind::ConformalSphere2) y = sphere_chart(Vec3(s(0), s(1), s(2)));
      const Vec dir = y - d.center;
      const double n = dir.norm();
      Point b = n > 0.0 ? Point(d.center + d.radius * dir / n) : y;
      if (m.kind() == ModelKind::ConformalSphere2) {
        const Vec3 e = sphere_embed(b);
        out = Vec(3);
        out << e(0), e(1), e(2);
      } else {
        out = b;
      }
      break;
    }
    case DomainSpec::Kind::Cap: {
      const Vec3 y(s(0), s(1), s(2));
      Vec3 perp = y - y.dot(d.axis) * d.axis;
      if (perp.norm() == 0.0) perp = (std::abs(d.axis(0)) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).cross(d.axis);
      const Vec3 b = std::cos(d.angle) * d.axis + std::sin(d.angle) * perp.normalized();
      out << b(0), b(1), b(2);
      break;
    }
  }
  return out;
}

}  // namespace

Scheme default_scheme(const MetricModel& model) noexcept {
  return model.kind() == ModelKind::ConformalSphere2 ? Scheme::ProjectedSphere : Scheme::EulerMaruyama;
}

DomainSpec DomainSpec::interval(double a, double b) {
  DomainSpec d;
  d.kind = Kind::Interval;
  d.a = a;
  d.b = b;
  return d;
}

DomainSpec DomainSpec::ball(Point center, double radius) {
  DomainSpec d;
  d.kind = Kind::Ball;
  d.center = std::move(center);
  d.radius = radius;
  return d;
}

DomainSpec DomainSpec::cap(Vec3 axis, double angle) {
  DomainSpec d;
  d.kind = Kind::Cap;
  const double n = axis.norm();
  d.axis = n > 0.0 && std::abs(n - 1.0) > 1e-14 ? Vec3(axis / n) : axis;
  d.angle = angle;
  return d;
}

void DomainSpec::validate(const MetricModel& m) const {
  const auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::ConfigError, "domain " + id() + " on " + m.id() + ": " + why);
  };
  switch (kind) {
    case Kind::Interval:
      if (m.dim() != 1) fail("intervals need a one-dimensional model");
      if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) fail("need finite a < b");
      break;
    case Kind::Ball:
      if (center.size() != m.dim()) fail("center has the wrong dimension");
      if (!(radius > 0.0) || !std::isfinite(radius)) fail("radius must be positive");
      if (m.kind() == ModelKind::PuncturedSpace3 && !(center.norm() > radius)) fail("ball must exclude the puncture");
      if (m.kind() == ModelKind::HyperbolicPlaneStatic && !(center(1) > radius)) fail("ball must stay inside the half-plane");
      break;
    case Kind::Cap:
      if (m.kind() != ModelKind::ConformalSphere2) fail("caps live on the sphere");
      if (!(angle > 0.0 && angle <= std::numbers::pi)) fail("angle must lie in (0, pi]");
      if (!(axis.norm() > 0.0)) fail("axis must be nonzero");
      break;
  }
}

std::string DomainSpec::id() const {
  using detail::format_double;
  switch (kind) {
    case Kind::Interval: return "interval:" + format_double(a) + "," + format_double(b);
    case Kind::Ball: {
      std::string s = "ball:" + format_double(radius) + "@";
      for (int i = 0; i < center.size(); ++i) s += (i ? "," : "") + format_double(center(i));
      return s;
    }
    case Kind::Cap:
      return "cap:" + format_double(angle) + "@" + format_double(axis(0)) + "," + format_double(axis(1)) + "," +
             format_double(axis(2));
  }
  return {};
}

DomainSpec parse_domain(std::string_view raw) {
  const std::string_view id = detail::trim(raw);
  const auto colon = id.find(':');
  if (colon == std::string_view::npos) throw Error(ErrorCode::ConfigError, "bad domain '" + std::string(raw) + "'");
  const std::string_view head = id.substr(0, colon), args = id.substr(colon + 1);
  if (head == "interval") {
    const auto v = detail::parse_doubles(args, ',');
    if (v.size() != 2) throw Error(ErrorCode::ConfigError, "interval:a,b expects two numbers");
    return DomainSpec::interval(v[0], v[1]);
  }
  const auto at = args.find('@');
  if (at == std::string_view::npos) throw Error(ErrorCode::ConfigError, "domain '" + std::string(raw) + "' needs '@'");
  const double r = detail::parse_double(args.substr(0, at));
  const auto v = detail::parse_doubles(args.substr(at + 1), ',');
  if (head == "ball") {
    if (v.empty() || v.size() > 3) throw Error(ErrorCode::ConfigError, "ball center needs 1 to 3 coordinates");
    Point c(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) c(i) = v[i];
    return DomainSpec::ball(c, r);
  }
  if (head == "cap") {
    if (v.size() != 3) throw Error(ErrorCode::ConfigError, "cap axis needs 3 coordinates");
    return DomainSpec::cap(Vec3(v[0], v[1], v[2]), r);
  }
  throw Error(ErrorCode::ConfigError, "unknown domain kind '" + std::string(head) + "'");
}

double domain_depth(const MetricModel& m, const DomainSpec& d, const Vec& s) {
  switch (d.kind) {
    case DomainSpec::Kind::Interval: {
      if (m.kind() == ModelKind::ConformalCircle) {
        if (is_full_circle(m, d)) return std::numeric_limits<double>::infinity();
        const double rel = wrap_angle(s(0) - d.a);
        const double len = d.b - d.a;
        return rel <= len ? std::min(rel, len - rel) : -std::min(rel - len, kTwoPi - rel);
      }
      return std::min(s(0) - d.a, d.b - s(0));
    }
    case DomainSpec::Kind::Ball: {
      if (m.kind() == ModelKind::ConformalSphere2) {
        return d.radius - (sphere_chart(Vec3(s(0), s(1), s(2))) - d.center).norm();
      }
      return d.radius - (s - d.center).norm();
    }
    case DomainSpec::Kind::Cap: {
      const double c = std::clamp(d.axis.dot(Vec3(s(0), s(1), s(2))), -1.0, 1.0);
      if (d.angle >= std::numbers::pi) return std::numeric_limits<double>::infinity();
      return d.angle - std::acos(c);
    }
  }
  return 0.0;
}

bool domain_contains(const MetricModel& m, const DomainSpec& d, const Vec& s) {
  return domain_depth(m, d, s) > 0.0;
}

void sde_coefficients(const MetricModel& model, double t, const Point& y, Vec& drift, Mat& sigma) {
  const MetricData md = metric_at(model, t, y);
  const int n = model.dim();
  drift = Vec::Zero(n);
  for (int k = 0; k < n; ++k) drift(k) = -md.g_inv.cwiseProduct(md.christoffel[k]).sum();
  sigma = md.g_inv.llt().matrixL();
}

// ---------------------------------------------------------------------------

std::size_t PathEnsemble::time_index(double t) const {
  const double tol = std::min(1e-9 * std::max(1.0, std::abs(t)), 0.25 * step_);
  const auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
  if (it == times_.end() || std::abs(*it - t) > tol) {
    std::ostringstream os;
    os << "t = " << t << " is not on the ensemble's recorded grid";
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
  return static_cast<std::size_t>(it - times_.begin());
}

Vec PathEnsemble::state(std::size_t path, std::size_t ti) const {
  Vec v(state_dim_);
  const std::size_t off = (path * times_.size() + ti) * state_dim_;
  for (int i = 0; i < state_dim_; ++i) v(i) = data_[off + i];
  return v;
}

Point PathEnsemble::chart(const Vec& s) const {
  if (model_.kind() == ModelKind::ConformalSphere2) return sphere_chart(Vec3(s(0), s(1), s(2)));
  return s;
}

std::size_t PathEnsemble::n_blown_up(double t) const {
  return static_cast<std::size_t>(std::count_if(blowup_.begin(), blowup_.end(), [&](double b) { return b <= t; }));
}

std::size_t PathEnsemble::domain_index(const DomainSpec& d) const {
  const std::string key = d.id();
  for (std::size_t i = 0; i < domains_.size(); ++i) {
    if (domains_[i].id() == key) return i;
  }
  return static_cast<std::size_t>(-1);
}

std::vector<ExitRecord> PathEnsemble::exits(const DomainSpec& d) const {
  const std::size_t idx = domain_index(d);
  if (idx != static_cast<std::size_t>(-1)) return exits_[idx];
  // Unregistered: detect on the recorded grid only.
  d.validate(model_);
  std::vector<ExitRecord> out(n_paths_);
  for (std::size_t p = 0; p < n_paths_; ++p) {
    ExitRecord& r = out[p];
    if (!domain_contains(model_, d, state(p, 0))) {
      r = {0.0, state(p, 0), ExitStatus::StartedOutside};
      continue;
    }
    r = {horizon(), state(p, times_.size() - 1), ExitStatus::Censored};
    for (std::size_t i = 1; i < times_.size(); ++i) {
      Vec s = state(p, i);
      if (!domain_contains(model_, d, s)) {
        r = {times_[i], s, ExitStatus::Exited};
        break;
      }
    }
  }
  return out;
}

std::size_t simulation_steps(const MetricModel& model, double horizon, double dt) {
  if (model.is_conformal()) dt = std::min(dt, 1e-3 * model.min_conformal(0.0, horizon));
  return static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
}

PathEnsemble simulate(const MetricModel& model, const Point& x, double horizon, const SdeConfig& cfg,
                      const SimulationPlan& plan) {
  model.require_point(x);
  if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "simulation horizon must be positive");
  model.require_time(0.0);
  model.require_time(horizon);
  if (!(cfg.dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  if (cfg.n_paths < 1) throw Error(ErrorCode::InvalidArgument, "need at least one path");
  if (cfg.dt > model.window().length() / 10.0) {
    throw Error(ErrorCode::InvalidArgument, "dt exceeds a tenth of the model's time window");
  }
  if (cfg.scheme == Scheme::ProjectedSphere && model.kind() != ModelKind::ConformalSphere2) {
    throw Error(ErrorCode::InvalidArgument, "ProjectedSphere needs a sphere model");
  }
  for (const auto& d : plan.domains) d.validate(model);

  const std::size_t n_steps = simulation_steps(model, horizon, cfg.dt);

  PathEnsemble e(model);
  e.start_ = x;
  e.cfg_ = cfg;
  e.step_ = horizon / double(n_steps);
  e.n_paths_ = cfg.n_paths;
  e.state_dim_ = model.kind() == ModelKind::ConformalSphere2 ? 3 : model.dim();
  e.domains_ = plan.domains;

  std::vector<std::size_t> steps{0, n_steps};
  if (plan.record_times.empty()) {
    for (int i = 1; i < 64; ++i) steps.push_back(static_cast<std::size_t>(std::llround(n_steps * (i / 64.0))));
  }
  for (double r : plan.record_times) {
    if (!(r >= 0.0 && r <= horizon * (1 + 1e-12))) {
      throw Error(ErrorCode::InvalidArgument, "record time outside [0, horizon]");
    }
    steps.push_back(std::min(n_steps, static_cast<std::size_t>(std::llround(r / e.step_))));
  }
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  e.steps_ = steps;
  for (std::size_t k : steps) e.times_.push_back(k == n_steps ? horizon : double(k) * e.step_);

  const std::size_t n_times = e.times_.size();
  const int sd = e.state_dim_;
  e.data_.assign(cfg.n_paths * n_times * sd, 0.0);
  e.blowup_.assign(cfg.n_paths, std::numeric_limits<double>::infinity());
  e.exits_.assign(plan.domains.size(), std::vector<ExitRecord>(cfg.n_paths));

  Vec start_state = x;
  if (model.kind() == ModelKind::ConformalSphere2) {
    const Vec3 y = sphere_embed(x);
    start_state = Vec(3);
    start_state << y(0), y(1), y(2);
  }
  const double h = e.step_;
  const double sqrt2h = std::sqrt(2.0 * h);
  const Scheme scheme = cfg.scheme;
  const ModelKind kind = model.kind();
  const int n_normals = (scheme == Scheme::ProjectedSphere) ? 3 : model.dim();
  const bool bridge = cfg.exit_policy == ExitPolicy::BrownianBridge;

  const auto run_path = [&](std::size_t p) {
    PathStream inc(cfg.seed, p, PathStream::Increments);
    PathStream br(cfg.seed, p, PathStream::Bridge);
    Vec s = start_state, prev = start_state;
    double* out = e.data_.data() + p * n_times * sd;
    std::size_t rec = 0;
    const auto record = [&](std::size_t k) {
      while (rec < n_times && e.steps_[rec] == k) {
        for (int i = 0; i < sd; ++i) out[rec * sd + i] = s(i);
        ++rec;
      }
    };
    std::vector<char> active(plan.domains.size(), 1);
    std::vector<double> depth(plan.domains.size());
    for (std::size_t di = 0; di < plan.domains.size(); ++di) {
      depth[di] = domain_depth(model, plan.domains[di], s);
      if (!(depth[di] > 0.0)) {
        e.exits_[di][p] = {0.0, s, ExitStatus::StartedOutside};
        active[di] = 0;
      }
    }
    record(0);
    bool blown = false;
    for (std::size_t k = 0; k < n_steps; ++k) {
      const double t = double(k) * h;
      prev = s;
      const std::uint64_t base = std::uint64_t(k) * n_normals;
      switch (kind) {
        case ModelKind::EuclideanLine:
        case ModelKind::EuclideanSpace:
        case ModelKind::PuncturedSpace3:
          for (int i = 0; i < sd; ++i) s(i) += sqrt2h * inc.normal(base + i);
          break;
        case ModelKind::ConformalCircle:
          s(0) += sqrt2h / std::sqrt(model.conformal(t)) * inc.normal(base);
          break;
        case ModelKind::HyperbolicPlaneStatic: {
          const double sig = s(1);
          s(0) += sqrt2h * sig * inc.normal(base);
          s(1) += sqrt2h * sig * inc.normal(base + 1);
          break;
        }
        case ModelKind::ConformalSphere2: {
          const double scale = sqrt2h / std::sqrt(model.conformal(t));
          if (scheme == Scheme::ProjectedSphere) {
            Vec3 y(s(0), s(1), s(2));
            Vec3 xi(inc.normal(base), inc.normal(base + 1), inc.normal(base + 2));
            xi -= xi.dot(y) * y;
            y += scale * xi;
            y.normalize();
            s << y(0), y(1), y(2);
          } else {
            const Vec3 y(s(0), s(1), s(2));
            if (1.0 - y(2) < 1e-12) {
              blown = true;
              break;
            }
            Point z = sphere_chart(y);
            const double f = 0.5 * (1.0 + z.squaredNorm());  // e^{-phi}
            z(0) += scale * f * inc.normal(base);
            z(1) += scale * f * inc.normal(base + 1);
            const Vec3 w = sphere_embed(z);
            s << w(0), w(1), w(2);
          }
          break;
        }
      }
      if (!blown) {
        if (!s.allFinite()) blown = true;
        if (kind == ModelKind::PuncturedSpace3 && s.norm() < kBlowUpRadius) blown = true;
        if (kind == ModelKind::HyperbolicPlaneStatic && !(s(1) > 0.0)) blown = true;
      }
      if (blown) {
        s = prev;  // frozen at the last valid state
        e.blowup_[p] = t + h;
        for (std::size_t kk = k + 1; kk <= n_steps; ++kk) record(kk);
        break;
      }
      const double t1 = (k + 1 == n_steps) ? horizon : t + h;
      double u_bridge = -1.0;
      for (std::size_t di = 0; di < plan.domains.size(); ++di) {
        if (!active[di]) continue;
        const DomainSpec& d = plan.domains[di];
        const double d0 = depth[di];
        const double d1 = depth[di] = domain_depth(model, d, s);
        bool exited = !(d1 > 0.0);
        if (!exited && bridge) {
          const double arg = d0 * d1 / (local_variance(model, d, t, prev) * h);
          // e^{-23} is below the smallest uniform the stream produces: no exit possible
          const double pr = arg > 23.0 ? 0.0 : std::exp(-arg);
          if (pr > 0.0) {
            if (u_bridge < 0.0) u_bridge = br.uniform(k);  // shared across domains: keeps nesting monotone
            exited = u_bridge < pr;
          }
        }
        if (exited) {
          e.exits_[di][p] = {t1, bridge ? project_to_boundary(model, d, s) : s, ExitStatus::Exited};
          active[di] = 0;
        }
      }
      record(k + 1);
    }
    for (std::size_t di = 0; di < plan.domains.size(); ++di) {
      if (active[di]) e.exits_[di][p] = {horizon, s, ExitStatus::Censored};
    }
  };

  unsigned n_threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, cfg.n_paths));
  std::vector<std::exception_ptr> errors(n_threads);
  const auto worker = [&](unsigned w) {
    try {
      for (std::size_t p = w; p < cfg.n_paths; p += n_threads) run_path(p);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (n_threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_threads; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return e;
}

std::vector<ExitRecord> first_exit(const PathEnsemble& e, const DomainSpec& d) { return e.exits(d); }

// ---------------------------------------------------------------------------

namespace {

void require_no_blowup(const PathEnsemble& e, double t) {
  const std::size_t n = e.n_blown_up(t);
  if (n > 0) {
    std::ostringstream os;
    os << n << " of " << e.n_paths() << " paths left the chart before t = " << t;
    throw Error(ErrorCode::BlowUp, os.str());
  }
}

}  // namespace

std::vector<double> sample_values(const PathEnsemble& e, const Observable& f, const Observation& obs) {
  std::vector<double> v(e.n_paths());
  switch (obs.kind) {
    case Observation::Kind::AtTime: {
      const std::size_t ti = e.time_index(obs.t);
      require_no_blowup(e, obs.t);
      const double t = e.times()[ti];
      for (std::size_t p = 0; p < e.n_paths(); ++p) v[p] = f(t, e.chart(e.state(p, ti)));
      break;
    }
    case Observation::Kind::Stopped: {
      const std::size_t ti = e.time_index(obs.t);
      const double t = e.times()[ti];
      const auto rec = e.exits(obs.domain);
      for (std::size_t p = 0; p < e.n_paths(); ++p) {
        const ExitRecord& r = rec[p];
        const bool stopped = r.status != ExitStatus::Censored && r.tau <= t;
        const double stop_time = stopped ? r.tau : t;
        if (e.blowup_time(p) <= stop_time) require_no_blowup(e, stop_time);
        v[p] = stopped ? f(r.tau, e.chart(r.state)) : f(t, e.chart(e.state(p, ti)));
      }
      break;
    }
    case Observation::Kind::AtExit: {
      const auto rec = e.exits(obs.domain);
      std::size_t censored = 0;
      for (std::size_t p = 0; p < e.n_paths(); ++p) {
        const ExitRecord& r = rec[p];
        if (r.status == ExitStatus::Censored) {
          ++censored;
          v[p] = std::numeric_limits<double>::quiet_NaN();
          continue;
        }
        if (e.blowup_time(p) <= r.tau) require_no_blowup(e, r.tau);
        v[p] = f(r.tau, e.chart(r.state));
      }
      if (2 * censored > e.n_paths()) {
        std::ostringstream os;
        os << censored << " of " << e.n_paths() << " paths are censored for domain " << obs.domain.id();
        throw Error(ErrorCode::CensoredDominates, os.str());
      }
      break;
    }
  }
  return v;
}

Estimate summarize(const std::vector<double>& values) {
  Estimate est;
  // shifted by the first finite value: exact for constant samples, less cancellation
  double shift = std::numeric_limits<double>::quiet_NaN();
  for (double x : values) {
    if (!std::isnan(x)) {
      shift = x;
      break;
    }
  }
  double sum = 0.0;
  std::size_t nan = 0;
  for (double x : values) {
    if (std::isnan(x)) {
      ++nan;
      continue;
    }
    sum += x - shift;
    ++est.n;
  }
  est.censored_fraction = values.empty() ? 0.0 : double(nan) / double(values.size());
  if (est.n == 0) {
    est.mean = std::numeric_limits<double>::quiet_NaN();
    return est;
  }
  const double dmean = sum / double(est.n);
  est.mean = shift + dmean;
  if (est.n > 1) {
    double ss = 0.0;
    for (double x : values) {
      if (!std::isnan(x)) ss += (x - shift - dmean) * (x - shift - dmean);
    }
    est.std_error = std::sqrt(ss / double(est.n - 1)) / std::sqrt(double(est.n));
  }
  return est;
}

Estimate expect(const PathEnsemble& e, const Observable& f, const Observation& obs) {
  return summarize(sample_values(e, f, obs));
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = double(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double F = cdf(samples[i]);
    d = std::max({d, (i + 1) / n - F, F - i / n});
  }
  return d;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'E', 'N', 'T', 'P', 'A', 'T', 'H', '1'};

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <class T>
void put(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw Error(ErrorCode::IoError, "truncated ensemble file");
  return to_little(v);
}

}  // namespace

void write_ensemble(const std::string& path, const PathEnsemble& e) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  os.write(kMagic, sizeof kMagic);
  const std::string id = e.model().id();
  put<std::uint32_t>(os, static_cast<std::uint32_t>(id.size()));
  os.write(id.data(), static_cast<std::streamsize>(id.size()));
  put<std::uint64_t>(os, e.config().seed);
  put<double>(os, e.step());
  put<std::uint64_t>(os, e.n_paths());
  put<std::uint64_t>(os, e.times().size());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(e.state_dim()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(e.start().size()));
  for (int i = 0; i < e.start().size(); ++i) put<double>(os, e.start()(i));
  for (double t : e.times()) put<double>(os, t);
  for (double v : e.raw()) put<double>(os, v);
  for (std::size_t p = 0; p < e.n_paths(); ++p) put<double>(os, e.blowup_time(p));
  if (!os) throw Error(ErrorCode::IoError, "failed writing " + path);
}

PathEnsemble read_ensemble(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw Error(ErrorCode::IoError, path + " is not an ensemble file");
  const auto id_len = get<std::uint32_t>(is);
  std::string id(id_len, '\0');
  is.read(id.data(), id_len);
  PathEnsemble e(parse_model(id));
  e.cfg_.seed = get<std::uint64_t>(is);
  e.step_ = get<double>(is);
  e.cfg_.dt = e.step_;
  e.n_paths_ = get<std::uint64_t>(is);
  e.cfg_.n_paths = e.n_paths_;
  const auto n_times = get<std::uint64_t>(is);
  e.state_dim_ = static_cast<int>(get<std::uint32_t>(is));
  const auto start_dim = get<std::uint32_t>(is);
  e.start_ = Point(start_dim);
  for (std::uint32_t i = 0; i < start_dim; ++i) e.start_(i) = get<double>(is);
  e.times_.resize(n_times);
  for (auto& t : e.times_) t = get<double>(is);
  e.steps_.resize(n_times);
  for (std::size_t i = 0; i < n_times; ++i) e.steps_[i] = static_cast<std::size_t>(std::llround(e.times_[i] / e.step_));
  e.data_.resize(e.n_paths_ * n_times * e.state_dim_);
  for (auto& v : e.data_) v = get<double>(is);
  e.blowup_.resize(e.n_paths_);
  for (auto& b : e.blowup_) b = get<double>(is);
  e.cfg_.scheme = default_scheme(e.model_);
  return e;
}

}  // namespace elab
