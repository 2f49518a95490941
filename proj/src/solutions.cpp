#include "elab/solutions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "parse_util.hpp"

namespace elab {

namespace {

constexpr int kCircleGrid = 4096;
constexpr int kSphereGridPolar = 91;
constexpr int kSphereGridAzimuth = 180;
constexpr int kHorizonScan = 300;

double legendre_value(int l, double x) {
  if (l == 0) return 1.0;
  double p0 = 1.0, p1 = x;
  for (int k = 1; k < l; ++k) {
    const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

}  // namespace

void legendre_series(int lmax, double x, std::vector<double>& p, std::vector<double>& dp,
                     std::vector<double>& d2p) {
  p.assign(lmax + 1, 0.0);
  dp.assign(lmax + 1, 0.0);
  d2p.assign(lmax + 1, 0.0);
  p[0] = 1.0;
  if (lmax == 0) return;
  p[1] = x;
  dp[1] = 1.0;
  for (int l = 1; l < lmax; ++l) {
    p[l + 1] = ((2.0 * l + 1.0) * x * p[l] - l * p[l - 1]) / (l + 1.0);
    dp[l + 1] = dp[l - 1] + (2.0 * l + 1.0) * p[l];
    d2p[l + 1] = d2p[l - 1] + (2.0 * l + 1.0) * dp[l];
  }
}

SolutionField::SolutionField(SolutionKind kind, MetricModel model)
    : kind_(kind), model_(std::move(model)), window_(model_.window()) {}

SolutionField SolutionField::constant(const MetricModel& model, double c) {
  if (!(c >= 0.0)) throw Error(ErrorCode::InvalidArgument, "constant solution needs c >= 0");
  SolutionField s(SolutionKind::Constant, model);
  s.a0_ = c;
  return s;
}

SolutionField SolutionField::exponential_line(const MetricModel& model, double a, double b) {
  if (model.kind() != ModelKind::EuclideanLine) {
    throw Error(ErrorCode::InvalidArgument, "expline lives on euclidean-line");
  }
  if (!(a > 0.0)) throw Error(ErrorCode::InvalidArgument, "expline needs a > 0");
  SolutionField s(SolutionKind::ExponentialLine, model);
  s.exp_ = {{a, b}};
  return s;
}

SolutionField SolutionField::exponential_sum(const MetricModel& model, std::vector<ExpTerm> terms) {
  if (model.kind() != ModelKind::EuclideanLine) {
    throw Error(ErrorCode::InvalidArgument, "expsum lives on euclidean-line");
  }
  if (terms.empty()) throw Error(ErrorCode::InvalidArgument, "expsum needs at least one term");
  for (const auto& term : terms) {
    if (!(term.a > 0.0)) throw Error(ErrorCode::InvalidArgument, "expsum needs every a_i > 0");
  }
  SolutionField s(SolutionKind::SumOfExponentialsLine, model);
  s.exp_ = std::move(terms);
  return s;
}

SolutionField SolutionField::circle_spectral(const MetricModel& model, double a0,
                                             std::vector<CircleMode> modes) {
  if (model.kind() != ModelKind::ConformalCircle) {
    throw Error(ErrorCode::InvalidArgument, "circle-spec lives on a circle model");
  }
  for (const auto& m : modes) {
    if (m.k < 1) throw Error(ErrorCode::InvalidArgument, "circle-spec modes need k >= 1");
  }
  SolutionField s(SolutionKind::CircleSpectral, model);
  s.a0_ = a0;
  s.circle_ = std::move(modes);
  s.fix_positivity_horizon();
  return s;
}

SolutionField SolutionField::radial_harmonic3(const MetricModel& model) {
  if (model.kind() != ModelKind::PuncturedSpace3) {
    throw Error(ErrorCode::InvalidArgument, "radial3 lives on punctured-3");
  }
  SolutionField s(SolutionKind::RadialHarmonic3, model);
  s.a0_ = 1.0;
  return s;
}

SolutionField SolutionField::sphere_spectral(const MetricModel& model, double a0,
                                             std::vector<SphereMode> modes) {
  if (model.kind() != ModelKind::ConformalSphere2) {
    throw Error(ErrorCode::InvalidArgument, "sphere-spec lives on a sphere2 model");
  }
  for (auto& m : modes) {
    if (m.degree < 1) throw Error(ErrorCode::InvalidArgument, "sphere-spec modes need degree >= 1");
    const double n = m.axis.norm();
    if (!(n > 0.0)) throw Error(ErrorCode::InvalidArgument, "sphere-spec axis must be nonzero");
    if (std::abs(n - 1.0) > 1e-14) m.axis /= n;
  }
  SolutionField s(SolutionKind::SphereSpectral, model);
  s.a0_ = a0;
  s.sphere_ = std::move(modes);
  s.fix_positivity_horizon();
  return s;
}

bool SolutionField::is_constant() const noexcept {
  switch (kind_) {
    case SolutionKind::Constant: return true;
    case SolutionKind::CircleSpectral:
      return std::all_of(circle_.begin(), circle_.end(), [](const CircleMode& m) { return m.amplitude == 0.0; });
    case SolutionKind::SphereSpectral:
      return std::all_of(sphere_.begin(), sphere_.end(), [](const SphereMode& m) { return m.amplitude == 0.0; });
    case SolutionKind::ExponentialLine:
    case SolutionKind::SumOfExponentialsLine:
      return std::all_of(exp_.begin(), exp_.end(), [](const ExpTerm& e) { return e.b == 0.0; });
    case SolutionKind::RadialHarmonic3: return false;
  }
  return false;
}

double SolutionField::exp_growth_rate() const noexcept {
  double r = 0.0;
  for (const auto& e : exp_) r = std::max(r, std::abs(e.b));
  return r;
}

void SolutionField::require(double t, const Point& y) const {
  if (!std::isfinite(t) || !window_.contains(t)) {
    std::ostringstream os;
    os << "t = " << t << " outside the window [" << window_.t_min << ", " << window_.t_max
       << "] of solution " << id();
    throw Error(ErrorCode::OutOfWindow, os.str());
  }
  model_.require_point(y);
}

namespace {

double sphere_ambient_value(const SolutionField& s, double t, const Vec3& y) {
  const double clock = s.model().clock(t);
  double u = s.offset();
  for (const auto& m : s.sphere_modes()) {
    const double lam = m.degree * (m.degree + 1.0);
    u += m.amplitude * std::exp(lam * clock) * legendre_value(m.degree, m.axis.dot(y));
  }
  return u;
}

double circle_value(const SolutionField& s, double t, double theta) {
  const double clock = s.model().clock(t);
  double u = s.offset();
  for (const auto& m : s.circle_modes()) {
    u += m.amplitude * std::exp(m.k * m.k * clock) * std::cos(m.k * theta + m.phase);
  }
  return u;
}

}  // namespace

double SolutionField::value(double t, const Point& y) const {
  require(t, y);
  switch (kind_) {
    case SolutionKind::Constant: return a0_;
    case SolutionKind::ExponentialLine:
    case SolutionKind::SumOfExponentialsLine: {
      double u = 0.0;
      for (const auto& e : exp_) u += e.a * std::exp(e.b * y(0) - e.b * e.b * t);
      return u;
    }
    case SolutionKind::CircleSpectral: return circle_value(*this, t, y(0));
    case SolutionKind::RadialHarmonic3: return a0_ / y.norm();
    case SolutionKind::SphereSpectral: return sphere_ambient_value(*this, t, sphere_embed(y));
  }
  return 0.0;
}

ChartJet SolutionField::chart_jet(double t, const Point& y) const {
  require(t, y);
  const int n = model_.dim();
  ChartJet j;
  j.du = Vec::Zero(n);
  j.d2u = Mat::Zero(n, n);
  switch (kind_) {
    case SolutionKind::Constant:
      j.u = a0_;
      break;
    case SolutionKind::ExponentialLine:
    case SolutionKind::SumOfExponentialsLine:
      for (const auto& e : exp_) {
        const double v = e.a * std::exp(e.b * y(0) - e.b * e.b * t);
        j.u += v;
        j.du(0) += e.b * v;
        j.d2u(0, 0) += e.b * e.b * v;
        j.du_dt -= e.b * e.b * v;
      }
      break;
    case SolutionKind::CircleSpectral: {
      const double clock = model_.clock(t);
      const double clock_rate = 1.0 / model_.conformal(t);
      j.u = a0_;
      for (const auto& m : circle_) {
        const double k2 = double(m.k) * m.k;
        const double amp = m.amplitude * std::exp(k2 * clock);
        const double arg = m.k * y(0) + m.phase;
        j.u += amp * std::cos(arg);
        j.du(0) -= amp * m.k * std::sin(arg);
        j.d2u(0, 0) -= amp * k2 * std::cos(arg);
        j.du_dt += amp * k2 * clock_rate * std::cos(arg);
      }
      break;
    }
    case SolutionKind::RadialHarmonic3: {
      const double r = y.norm();
      const double r3 = r * r * r;
      j.u = a0_ / r;
      j.du = -a0_ * y / r3;
      j.d2u = a0_ * (3.0 * y * y.transpose() / (r3 * r * r) - Mat::Identity(3, 3) / r3);
      break;
    }
    case SolutionKind::SphereSpectral: {
      const Vec3 e = sphere_embed(y);
      const double clock = model_.clock(t);
      const double clock_rate = 1.0 / model_.conformal(t);
      double f = a0_;
      double f_t = 0.0;
      Vec3 grad = Vec3::Zero();
      Eigen::Matrix3d hess = Eigen::Matrix3d::Zero();
      std::vector<double> p, dp, d2p;
      for (const auto& m : sphere_) {
        const double lam = m.degree * (m.degree + 1.0);
        const double amp = m.amplitude * std::exp(lam * clock);
        legendre_series(m.degree, m.axis.dot(e), p, dp, d2p);
        f += amp * p[m.degree];
        f_t += amp * lam * clock_rate * p[m.degree];
        grad += amp * dp[m.degree] * m.axis;
        hess += amp * d2p[m.degree] * m.axis * m.axis.transpose();
      }
      const ChartPartials cp = pull_back_sphere(y, f, grad, hess);
      j.u = f;
      j.du = cp.grad;
      j.d2u = cp.hess;
      j.du_dt = f_t;
      break;
    }
  }
  return j;
}

double SolutionField::min_on_grid(double t) const {
  double lo = std::numeric_limits<double>::infinity();
  if (kind_ == SolutionKind::CircleSpectral) {
    for (int i = 0; i < kCircleGrid; ++i) {
      const double theta = 2.0 * std::numbers::pi * i / kCircleGrid;
      lo = std::min(lo, circle_value(*this, t, theta));
    }
  } else if (kind_ == SolutionKind::SphereSpectral) {
    for (int i = 0; i < kSphereGridPolar; ++i) {
      const double polar = std::numbers::pi * i / (kSphereGridPolar - 1);
      const int n_az = (i == 0 || i == kSphereGridPolar - 1) ? 1 : kSphereGridAzimuth;
      for (int j = 0; j < n_az; ++j) {
        const double az = 2.0 * std::numbers::pi * j / kSphereGridAzimuth;
        const Vec3 y(std::sin(polar) * std::cos(az), std::sin(polar) * std::sin(az), std::cos(polar));
        lo = std::min(lo, sphere_ambient_value(*this, t, y));
      }
    }
    // Zonal extrema sit on the axes; include them exactly.
    for (const auto& m : sphere_) {
      lo = std::min({lo, sphere_ambient_value(*this, t, m.axis), sphere_ambient_value(*this, t, -m.axis)});
    }
  }
  return std::isnan(lo) ? -std::numeric_limits<double>::infinity() : lo;
}

void SolutionField::fix_positivity_horizon() {
  const TimeWindow w = model_.window();
  const double m0 = min_on_grid(w.t_min);
  if (m0 < 0.0) {
    std::ostringstream os;
    os << id() << " takes negative values (min " << m0 << ") at t = " << w.t_min;
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
  const auto positive = [&](double t) { return min_on_grid(t) > 0.0; };
  if (!positive(w.t_min)) {
    window_ = {w.t_min, w.t_min};
    return;
  }
  // Scan geometrically for the first nonpositive time, then bisect.
  double last_ok = w.t_min;
  double first_bad = -1.0;
  for (int k = 0; k <= kHorizonScan; ++k) {
    const double t = w.t_min + w.length() * std::pow(10.0, -9.0 + 9.0 * k / kHorizonScan);
    if (positive(t)) {
      last_ok = t;
    } else {
      first_bad = t;
      break;
    }
  }
  if (first_bad < 0.0) return;
  double lo = last_ok, hi = first_bad;
  for (int it = 0; it < 100 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (positive(mid) ? lo : hi) = mid;
  }
  window_.t_max = lo;
}

std::string SolutionField::id() const {
  using detail::format_double;
  std::string s;
  switch (kind_) {
    case SolutionKind::Constant: return "const:" + format_double(a0_);
    case SolutionKind::ExponentialLine:
      return "expline:" + format_double(exp_[0].a) + "," + format_double(exp_[0].b);
    case SolutionKind::SumOfExponentialsLine:
      s = "expsum:";
      for (std::size_t i = 0; i < exp_.size(); ++i) {
        if (i) s += ";";
        s += format_double(exp_[i].a) + "," + format_double(exp_[i].b);
      }
      return s;
    case SolutionKind::CircleSpectral:
      s = "circle-spec:" + format_double(a0_);
      for (const auto& m : circle_) {
        s += ",(" + std::to_string(m.k) + "," + format_double(m.amplitude) + "," + format_double(m.phase) + ")";
      }
      return s;
    case SolutionKind::RadialHarmonic3: return "radial3";
    case SolutionKind::SphereSpectral:
      s = "sphere-spec:" + format_double(a0_);
      for (const auto& m : sphere_) {
        s += ",(" + std::to_string(m.degree) + "," + format_double(m.amplitude) + "," +
             format_double(m.axis(0)) + "," + format_double(m.axis(1)) + "," + format_double(m.axis(2)) + ")";
      }
      return s;
  }
  return s;
}

SolutionField SolutionField::scaled(double factor) const {
  if (!(factor > 0.0)) throw Error(ErrorCode::InvalidArgument, "scale factor must be positive");
  if (kind_ == SolutionKind::RadialHarmonic3) {
    SolutionField s = *this;
    s.a0_ *= factor;
    return s;
  }
  SolutionField s = *this;
  s.a0_ *= factor;
  for (auto& e : s.exp_) e.a *= factor;
  for (auto& m : s.circle_) m.amplitude *= factor;
  for (auto& m : s.sphere_) m.amplitude *= factor;
  return s;
}

namespace {

// Splits "a0,(..),(..)" into the head number and the parenthesised groups.
std::pair<double, std::vector<std::vector<double>>> parse_spectral(std::string_view args) {
  const auto open = args.find('(');
  std::string_view head = detail::trim(args.substr(0, open));
  if (!head.empty() && head.back() == ',') head.remove_suffix(1);
  const double a0 = detail::parse_double(head);
  std::vector<std::vector<double>> groups;
  std::size_t pos = open;
  while (pos != std::string_view::npos && pos < args.size()) {
    const auto close = args.find(')', pos);
    if (close == std::string_view::npos) throw Error(ErrorCode::ConfigError, "unbalanced parentheses");
    groups.push_back(detail::parse_doubles(args.substr(pos + 1, close - pos - 1), ','));
    pos = args.find('(', close);
  }
  return {a0, groups};
}

}  // namespace

SolutionField parse_solution(std::string_view raw, const MetricModel& model) {
  const std::string_view id = detail::trim(raw);
  std::string_view head = id, args;
  if (auto colon = id.find(':'); colon != std::string_view::npos) {
    head = id.substr(0, colon);
    args = id.substr(colon + 1);
  }
  try {
    if (head == "const") {
      const auto v = detail::parse_doubles(args, ',');
      if (v.size() != 1) throw Error(ErrorCode::ConfigError, "const:c expects one number");
      return SolutionField::constant(model, v[0]);
    }
    if (head == "expline") {
      const auto v = detail::parse_doubles(args, ',');
      if (v.size() != 2) throw Error(ErrorCode::ConfigError, "expline:a,b expects two numbers");
      return SolutionField::exponential_line(model, v[0], v[1]);
    }
    if (head == "expsum") {
      std::vector<ExpTerm> terms;
      for (auto part : detail::split(args, ';')) {
        const auto v = detail::parse_doubles(part, ',');
        if (v.size() != 2) throw Error(ErrorCode::ConfigError, "expsum terms are 'a,b'");
        terms.push_back({v[0], v[1]});
      }
      return SolutionField::exponential_sum(model, std::move(terms));
    }
    if (head == "radial3" && args.empty()) return SolutionField::radial_harmonic3(model);
    if (head == "circle-spec") {
      auto [a0, groups] = parse_spectral(args);
      std::vector<CircleMode> modes;
      for (const auto& g : groups) {
        if (g.size() != 2 && g.size() != 3) throw Error(ErrorCode::ConfigError, "circle-spec modes are (k,a[,phase])");
        modes.push_back({static_cast<int>(g[0]), g[1], g.size() == 3 ? g[2] : 0.0});
      }
      return SolutionField::circle_spectral(model, a0, std::move(modes));
    }
    if (head == "sphere-spec") {
      auto [a0, groups] = parse_spectral(args);
      std::vector<SphereMode> modes;
      for (const auto& g : groups) {
        if (g.size() != 2 && g.size() != 5) throw Error(ErrorCode::ConfigError, "sphere-spec modes are (l,a[,nx,ny,nz])");
        SphereMode m{static_cast<int>(g[0]), g[1], Vec3::UnitZ()};
        if (g.size() == 5) m.axis = Vec3(g[2], g[3], g[4]);
        modes.push_back(m);
      }
      return SolutionField::sphere_spectral(model, a0, std::move(modes));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, "solution '" + std::string(raw) + "': " + e.what());
  }
  throw Error(ErrorCode::ConfigError, "unknown solution id '" + std::string(raw) + "'");
}

std::vector<std::string> solution_catalog() {
  return {"const:c", "expline:a,b", "expsum:a1,b1;a2,b2;...", "circle-spec:a0,(k,ak,phik)...",
          "radial3", "sphere-spec:a0,(l,al[,nx,ny,nz])..."};
}

ValueJet eval_jet(const SolutionField& sol, double t, const Point& y, bool with_log) {
  return eval_jet(sol, t, y, metric_at(sol.model(), t, y), with_log);
}

ValueJet eval_jet(const SolutionField& sol, double t, const Point& y, const MetricData& metric,
                  bool with_log) {
  const ChartJet cj = sol.chart_jet(t, y);
  const int n = static_cast<int>(y.size());
  ValueJet j;
  j.u = cj.u;
  j.du_dt = cj.du_dt;
  j.grad_u = cj.du;
  j.hess_u = cj.d2u;
  for (int k = 0; k < n; ++k) j.hess_u -= metric.christoffel[k] * cj.du(k);
  j.grad_norm_sq = cj.du.dot(metric.g_inv * cj.du);
  j.laplacian_u = metric.g_inv.cwiseProduct(j.hess_u).sum();
  if (cj.u > 0.0) {
    j.hess_log_u = j.hess_u / cj.u - cj.du * cj.du.transpose() / (cj.u * cj.u);
  } else if (with_log) {
    throw Error(ErrorCode::LogOfZero, "Hess log u requested where u = 0 (solution " + sol.id() + ")");
  } else {
    j.hess_log_u = Mat::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  }
  return j;
}

JetScalars jet_scalars(const ValueJet& jet, const MetricData& metric) {
  JetScalars s;
  s.u = jet.u;
  s.u_log_u = u_log_u(jet.u);
  s.grad_u_sq = jet.grad_norm_sq;
  if (jet.u <= 0.0) {
    if (jet.grad_norm_sq > 0.0) throw Error(ErrorCode::LogOfZero, "gradient quantities at u = 0");
    return s;
  }
  const double u = jet.u;
  const Vec grad_vec = metric.g_inv * jet.grad_u;  // index raised
  s.fisher = jet.grad_norm_sq / u;
  const Mat gh = metric.g_inv * jet.hess_log_u;
  s.hess_log_norm_sq = (gh * gh).trace();
  const Vec grad_log = grad_vec / u;
  s.grad_log_norm = std::sqrt(std::max(0.0, jet.grad_norm_sq) ) / u;
  s.curvature_form = grad_log.dot((metric.ricci - 0.5 * metric.dg_dt) * grad_log);
  s.second = 2.0 * u * (s.hess_log_norm_sq + s.curvature_form);
  const double one_plus_log = 1.0 + std::log(u);
  s.grad_u_log_u_sq = one_plus_log * one_plus_log * jet.grad_norm_sq;
  const Vec w = 2.0 * jet.hess_u * grad_vec / u - (jet.grad_norm_sq / (u * u)) * jet.grad_u;
  s.grad_fisher_sq = w.dot(metric.g_inv * w);
  return s;
}

JetScalars jet_scalars(const SolutionField& sol, double t, const Point& y) {
  const MetricData m = metric_at(sol.model(), t, y);
  return jet_scalars(eval_jet(sol, t, y, m), m);
}

double backward_residual(const SolutionField& sol, double t, const Point& y) {
  const ValueJet j = eval_jet(sol, t, y, false);
  return std::abs(j.du_dt + j.laplacian_u);
}

std::pair<double, double> bochner_identities(const SolutionField& sol, double t, const Point& y) {
  const JetScalars here = jet_scalars(sol, t, y);
  if (!(here.u > 0.0)) throw Error(ErrorCode::LogOfZero, "Bochner identities need u > 0");
  const MetricModel& model = sol.model();
  const auto ulogu = [&](double s, const Point& p) { return u_log_u(sol.value(s, p)); };
  const auto fisher = [&](double s, const Point& p) { return jet_scalars(sol, s, p).fisher; };

  const double dt1 = fd_time_derivative(sol.window(), t, [&](double s) { return ulogu(s, y); });
  const double lap1 = fd_laplacian(model, t, y, [&](const Point& p) { return ulogu(t, p); });
  const double r1 = std::abs(dt1 + lap1 - here.fisher);

  const double dt2 = fd_time_derivative(sol.window(), t, [&](double s) { return fisher(s, y); });
  const double lap2 = fd_laplacian(model, t, y, [&](const Point& p) { return fisher(t, p); });
  // (2 Ric - dg/dt)(grad log u, grad log u) = 2 * curvature_form.
  const double rhs2 = here.u * (2.0 * here.hess_log_norm_sq + 2.0 * here.curvature_form);
  const double r2 = std::abs(dt2 + lap2 - rhs2);
  return {r1, r2};
}

// ---------------------------------------------------------------------------

WrappedGaussian wrapped_gaussian(double s, double delta) {
  const double pi = std::numbers::pi;
  const double d0 = std::remainder(delta, 2.0 * pi);
  WrappedGaussian w;
  if (s <= 1.0) {
    const double norm = 1.0 / std::sqrt(4.0 * pi * s);
    for (int k = -6; k <= 6; ++k) {
      const double d = d0 + 2.0 * pi * k;
      const double g = norm * std::exp(-d * d / (4.0 * s));
      w.q += g;
      w.dq += -d / (2.0 * s) * g;
      w.d2q += (d * d / (4.0 * s * s) - 1.0 / (2.0 * s)) * g;
    }
  } else {
    w.q = 1.0 / (2.0 * pi);
    for (int k = 1; k <= 30; ++k) {
      const double e = std::exp(-double(k) * k * s) / pi;
      w.q += e * std::cos(k * d0);
      w.dq -= e * k * std::sin(k * d0);
      w.d2q -= e * k * k * std::cos(k * d0);
    }
  }
  return w;
}

ZonalKernel sphere_zonal_kernel(double s, double cos_angle) {
  if (!(s > 1e-6)) throw Error(ErrorCode::InvalidArgument, "sphere kernel series needs clock s > 1e-6");
  const int lmax = static_cast<int>(std::ceil(std::sqrt(60.0 / s))) + 8;
  const double x = std::clamp(cos_angle, -1.0, 1.0);
  ZonalKernel z;
  double p0 = 1.0, p1 = x;
  double dp0 = 0.0, dp1 = 1.0;
  double d2p0 = 0.0, d2p1 = 0.0;
  const double inv4pi = 1.0 / (4.0 * std::numbers::pi);
  z.k = inv4pi;
  for (int l = 1; l <= lmax; ++l) {
    const double c = (2.0 * l + 1.0) * inv4pi * std::exp(-l * (l + 1.0) * s);
    z.k += c * p1;
    z.dk += c * dp1;
    z.d2k += c * d2p1;
    const double p2 = ((2.0 * l + 1.0) * x * p1 - l * p0) / (l + 1.0);
    const double dp2 = dp0 + (2.0 * l + 1.0) * p1;
    const double d2p2 = d2p0 + (2.0 * l + 1.0) * dp1;
    p0 = p1; p1 = p2;
    dp0 = dp1; dp1 = dp2;
    d2p0 = d2p1; d2p1 = d2p2;
  }
  return z;
}

HeatKernelField::HeatKernelField(KernelKind kind, MetricModel model, Point base_point)
    : kind_(kind), model_(std::move(model)), base_(std::move(base_point)) {
  const ModelKind mk = model_.kind();
  const bool ok = (kind_ == KernelKind::GaussianSpace &&
                   (mk == ModelKind::EuclideanLine || mk == ModelKind::EuclideanSpace ||
                    mk == ModelKind::PuncturedSpace3)) ||
                  (kind_ == KernelKind::CircleTheta && mk == ModelKind::ConformalCircle) ||
                  (kind_ == KernelKind::SphereSpectral && mk == ModelKind::ConformalSphere2);
  if (!ok) throw Error(ErrorCode::InvalidArgument, "kernel kind does not match model " + model_.id());
  if (model_.rate() != 0.0 && kind_ == KernelKind::GaussianSpace) {
    throw Error(ErrorCode::InvalidArgument, "Gaussian kernel needs a static flat model");
  }
  model_.require_point(base_);
  if (kind_ == KernelKind::SphereSpectral) base_embed_ = sphere_embed(base_);
}

HeatKernelField HeatKernelField::canonical(const MetricModel& model, const Point& base_point) {
  switch (model.kind()) {
    case ModelKind::EuclideanLine:
    case ModelKind::EuclideanSpace:
    case ModelKind::PuncturedSpace3:
      return {KernelKind::GaussianSpace, model, base_point};
    case ModelKind::ConformalCircle: return {KernelKind::CircleTheta, model, base_point};
    case ModelKind::ConformalSphere2: return {KernelKind::SphereSpectral, model, base_point};
    case ModelKind::HyperbolicPlaneStatic: break;
  }
  throw Error(ErrorCode::ConfigError, "model " + model.id() + " has no closed-form heat kernel");
}

std::string HeatKernelField::id() const {
  switch (kind_) {
    case KernelKind::GaussianSpace: return "gaussian";
    case KernelKind::CircleTheta: return "circle-theta";
    case KernelKind::SphereSpectral: return "sphere-spectral";
  }
  return {};
}

HeatKernelField parse_kernel(std::string_view raw, const MetricModel& model, const Point& base_point) {
  const std::string_view id = detail::trim(raw);
  try {
    if (id == "auto") return HeatKernelField::canonical(model, base_point);
    if (id == "gaussian") return {KernelKind::GaussianSpace, model, base_point};
    if (id == "circle-theta") return {KernelKind::CircleTheta, model, base_point};
    if (id == "sphere-spectral") return {KernelKind::SphereSpectral, model, base_point};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, "kernel '" + std::string(raw) + "': " + e.what());
  }
  throw Error(ErrorCode::ConfigError, "unknown kernel id '" + std::string(raw) + "'");
}

namespace {

void require_kernel_time(const MetricModel& model, double t) {
  model.require_time(t);
  if (!(t > 0.0)) throw Error(ErrorCode::OutOfWindow, "heat kernel needs t > 0");
}

}  // namespace

double HeatKernelField::sphere_density_at(double t, double cos_angle) const {
  require_kernel_time(model_, t);
  return sphere_zonal_kernel(model_.clock(t), cos_angle).k / model_.conformal(t);
}

double HeatKernelField::density(double t, const Point& y) const {
  require_kernel_time(model_, t);
  model_.require_point(y);
  switch (kind_) {
    case KernelKind::GaussianSpace: {
      const int n = model_.dim();
      return std::pow(4.0 * std::numbers::pi * t, -0.5 * n) * std::exp(-(y - base_).squaredNorm() / (4.0 * t));
    }
    case KernelKind::CircleTheta:
      return wrapped_gaussian(model_.clock(t), y(0) - base_(0)).q / std::sqrt(model_.conformal(t));
    case KernelKind::SphereSpectral:
      return sphere_zonal_kernel(model_.clock(t), base_embed_.dot(sphere_embed(y))).k / model_.conformal(t);
  }
  return 0.0;
}

ChartPartials HeatKernelField::partials(double t, const Point& y) const {
  require_kernel_time(model_, t);
  model_.require_point(y);
  ChartPartials out;
  switch (kind_) {
    case KernelKind::GaussianSpace: {
      const int n = model_.dim();
      const Vec d = y - base_;
      const double p = std::pow(4.0 * std::numbers::pi * t, -0.5 * n) * std::exp(-d.squaredNorm() / (4.0 * t));
      out.value = p;
      out.grad = -d / (2.0 * t) * p;
      out.hess = (d * d.transpose() / (4.0 * t * t) - Mat::Identity(n, n) / (2.0 * t)) * p;
      break;
    }
    case KernelKind::CircleTheta: {
      const WrappedGaussian w = wrapped_gaussian(model_.clock(t), y(0) - base_(0));
      const double scale = 1.0 / std::sqrt(model_.conformal(t));
      out.value = w.q * scale;
      out.grad = Vec::Constant(1, w.dq * scale);
      out.hess = Mat::Constant(1, 1, w.d2q * scale);
      break;
    }
    case KernelKind::SphereSpectral: {
      const Vec3 e = sphere_embed(y);
      const ZonalKernel z = sphere_zonal_kernel(model_.clock(t), base_embed_.dot(e));
      const double inv_c = 1.0 / model_.conformal(t);
      out = pull_back_sphere(y, z.k * inv_c, z.dk * inv_c * base_embed_,
                             z.d2k * inv_c * base_embed_ * base_embed_.transpose());
      break;
    }
  }
  return out;
}

double adjoint_residual(const HeatKernelField& kernel, double t, const Point& y) {
  const MetricModel& model = kernel.model();
  const TimeWindow w{std::max(model.window().t_min, 0.5 * t), model.window().t_max};
  const double dp_dt = fd_time_derivative(w, t, [&](double s) { return kernel.density(s, y); });
  const ChartPartials cp = kernel.partials(t, y);
  const MetricData m = metric_at(model, t, y);
  Mat cov = cp.hess;
  for (int k = 0; k < model.dim(); ++k) cov -= m.christoffel[k] * cp.grad(k);
  const double lap = m.g_inv.cwiseProduct(cov).sum();
  return std::abs(dp_dt - lap + 0.5 * m.tr_dg_dt * cp.value);
}

}  // namespace elab
