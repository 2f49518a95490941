#include "elab/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "parse_util.hpp"

namespace elab {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::OutOfWindow: return "OutOfWindow";
    case ErrorCode::ChartViolation: return "ChartViolation";
    case ErrorCode::LogOfZero: return "LogOfZero";
    case ErrorCode::QuadratureDivergence: return "QuadratureDivergence";
    case ErrorCode::BlowUp: return "BlowUp";
    case ErrorCode::CensoredDominates: return "CensoredDominates";
    case ErrorCode::InsufficientCurve: return "InsufficientCurve";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

constexpr double kPunctureRadius = 1e-8;
constexpr double kStaticHorizon = 1e6;

TimeWindow conformal_default_window(double c0, double rate) {
  if (rate >= 0.0) return {0.0, kStaticHorizon};
  return {0.0, 0.99 * c0 / (-rate)};
}

Mat zeros(int n) { return Mat::Zero(n, n); }

// g = scale * exp(2 phi) * delta in n dimensions.
void fill_conformal(MetricData& m, int n, double scale, double scale_rate,
                    double phi, const Vec& dphi) {
  const double e2phi = std::exp(2.0 * phi);
  m.g = Mat::Identity(n, n) * (scale * e2phi);
  m.g_inv = Mat::Identity(n, n) / (scale * e2phi);
  m.dg_dt = Mat::Identity(n, n) * (scale_rate * e2phi);
  for (int k = 0; k < 3; ++k) m.christoffel[k] = zeros(n);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double v = 0.0;
        if (i == k) v += dphi(j);
        if (j == k) v += dphi(i);
        if (i == j) v -= dphi(k);
        m.christoffel[k](i, j) = v;
      }
    }
  }
  m.sqrt_det_g = std::pow(scale * e2phi, 0.5 * n);
  m.tr_dg_dt = n * scale_rate / scale;
}

}  // namespace

MetricModel::MetricModel(ModelKind kind, int dim, double c0, double rate,
                         TimeWindow w)
    : kind_(kind), dim_(dim), c0_(c0), rate_(rate), window_(w) {
  if (w.t_min < 0.0 || !(w.t_max > w.t_min)) {
    throw Error(ErrorCode::InvalidArgument, "time window must satisfy 0 <= t_min < t_max");
  }
  if (!(c0 > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "conformal factor c0 must be positive");
  }
  if (!(conformal(w.t_min) > 0.0) || !(conformal(w.t_max) > 0.0)) {
    std::ostringstream os;
    os << "conformal factor c(t) = " << c0 << " + " << rate
       << " t must stay positive on [" << w.t_min << ", " << w.t_max << "]";
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
}

MetricModel MetricModel::euclidean_line(TimeWindow w) {
  return {ModelKind::EuclideanLine, 1, 1.0, 0.0, w};
}

MetricModel MetricModel::euclidean_space(int n, TimeWindow w) {
  if (n < 1 || n > 3) {
    throw Error(ErrorCode::InvalidArgument, "euclidean-space supports dimensions 1..3");
  }
  return {ModelKind::EuclideanSpace, n, 1.0, 0.0, w};
}

MetricModel MetricModel::punctured_space3(TimeWindow w) {
  return {ModelKind::PuncturedSpace3, 3, 1.0, 0.0, w};
}

MetricModel MetricModel::conformal_circle(double c0, double rate) {
  return conformal_circle(c0, rate, conformal_default_window(c0, rate));
}

MetricModel MetricModel::conformal_circle(double c0, double rate, TimeWindow w) {
  MetricModel m{ModelKind::ConformalCircle, 1, c0, rate, w};
  m.custom_window_ = !(w.t_min == 0.0 && w.t_max == conformal_default_window(c0, rate).t_max);
  return m;
}

MetricModel MetricModel::conformal_sphere2(double c0, double rate) {
  return conformal_sphere2(c0, rate, conformal_default_window(c0, rate));
}

MetricModel MetricModel::conformal_sphere2(double c0, double rate, TimeWindow w) {
  MetricModel m{ModelKind::ConformalSphere2, 2, c0, rate, w};
  m.custom_window_ = !(w.t_min == 0.0 && w.t_max == conformal_default_window(c0, rate).t_max);
  return m;
}

MetricModel MetricModel::hyperbolic_plane_static(TimeWindow w) {
  return {ModelKind::HyperbolicPlaneStatic, 2, 1.0, 0.0, w};
}

bool MetricModel::is_conformal() const noexcept {
  return kind_ == ModelKind::ConformalCircle || kind_ == ModelKind::ConformalSphere2;
}

bool MetricModel::is_compact() const noexcept { return is_conformal(); }

double MetricModel::min_conformal(double t0, double t1) const noexcept {
  return std::min(conformal(t0), conformal(t1));
}

double MetricModel::clock(double t) const noexcept {
  if (rate_ == 0.0) return t / c0_;
  return std::log1p(rate_ * t / c0_) / rate_;
}

std::string MetricModel::id() const {
  std::string base;
  switch (kind_) {
    case ModelKind::EuclideanLine: base = "euclidean-line"; break;
    case ModelKind::EuclideanSpace: base = "euclidean-space:" + std::to_string(dim_); break;
    case ModelKind::PuncturedSpace3: base = "punctured-3"; break;
    case ModelKind::ConformalCircle:
      base = "circle:" + detail::format_double(c0_) + "," + detail::format_double(rate_);
      break;
    case ModelKind::ConformalSphere2:
      base = "sphere2:" + detail::format_double(c0_) + "," + detail::format_double(rate_);
      break;
    case ModelKind::HyperbolicPlaneStatic: base = "hyperbolic-static"; break;
  }
  const bool custom = is_conformal() ? custom_window_
                                     : !(window_.t_min == 0.0 && window_.t_max == kStaticHorizon);
  if (custom) {
    base += "@" + detail::format_double(window_.t_min) + "," + detail::format_double(window_.t_max);
  }
  return base;
}

void MetricModel::require_time(double t) const {
  if (!std::isfinite(t) || !window_.contains(t)) {
    std::ostringstream os;
    os << "t = " << t << " outside time window [" << window_.t_min << ", "
       << window_.t_max << "] of model " << id();
    throw Error(ErrorCode::OutOfWindow, os.str());
  }
}

bool MetricModel::in_chart(const Point& y) const noexcept {
  if (y.size() != dim_ || !y.allFinite()) return false;
  switch (kind_) {
    case ModelKind::PuncturedSpace3: return y.norm() >= kPunctureRadius;
    case ModelKind::HyperbolicPlaneStatic: return y(1) > 0.0;
    default: return true;
  }
}

void MetricModel::require_point(const Point& y) const {
  if (!in_chart(y)) {
    std::ostringstream os;
    os << "point outside the chart of model " << id() << " (" << y.transpose() << ")";
    throw Error(ErrorCode::ChartViolation, os.str());
  }
}

MetricModel parse_model(std::string_view raw) {
  std::string_view id = detail::trim(raw);
  TimeWindow window{};
  bool custom = false;
  if (auto at = id.find('@'); at != std::string_view::npos) {
    auto w = detail::parse_doubles(id.substr(at + 1), ',');
    if (w.size() != 2) throw Error(ErrorCode::ConfigError, "bad time window in model id '" + std::string(raw) + "'");
    window = {w[0], w[1]};
    custom = true;
    id = id.substr(0, at);
  }
  std::string_view head = id;
  std::string_view args;
  if (auto colon = id.find(':'); colon != std::string_view::npos) {
    head = id.substr(0, colon);
    args = id.substr(colon + 1);
  }
  try {
    if (head == "euclidean-line" && args.empty()) return MetricModel::euclidean_line(window);
    if (head == "euclidean-space") {
      auto v = detail::parse_doubles(args, ',');
      if (v.size() != 1 || v[0] != std::floor(v[0])) throw Error(ErrorCode::ConfigError, "euclidean-space:n expects an integer");
      return MetricModel::euclidean_space(static_cast<int>(v[0]), window);
    }
    if (head == "punctured-3" && args.empty()) return MetricModel::punctured_space3(window);
    if (head == "hyperbolic-static" && args.empty()) return MetricModel::hyperbolic_plane_static(window);
    if (head == "circle" || head == "sphere2") {
      auto v = detail::parse_doubles(args, ',');
      if (v.size() != 2) throw Error(ErrorCode::ConfigError, std::string(head) + ":c0,rate expects two numbers");
      if (head == "circle") {
        return custom ? MetricModel::conformal_circle(v[0], v[1], window)
                      : MetricModel::conformal_circle(v[0], v[1]);
      }
      return custom ? MetricModel::conformal_sphere2(v[0], v[1], window)
                    : MetricModel::conformal_sphere2(v[0], v[1]);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, "model '" + std::string(raw) + "': " + e.what());
  }
  throw Error(ErrorCode::ConfigError, "unknown model id '" + std::string(raw) + "'");
}

std::vector<std::string> model_catalog() {
  return {"euclidean-line", "euclidean-space:n", "punctured-3", "circle:c0,rate",
          "sphere2:c0,rate", "hyperbolic-static"};
}

Vec3 sphere_embed(const Point& z) {
  const double r2 = z.squaredNorm();
  const double d = 1.0 + r2;
  return {2.0 * z(0) / d, 2.0 * z(1) / d, (r2 - 1.0) / d};
}

Point sphere_chart(const Vec3& y) {
  const double denom = 1.0 - y(2);
  if (!(denom > 1e-14)) {
    throw Error(ErrorCode::ChartViolation, "the north pole is not covered by the stereographic chart");
  }
  return make_point({y(0) / denom, y(1) / denom});
}

ChartPartials pull_back_sphere(const Point& z, double value, const Vec3& grad,
                               const Eigen::Matrix3d& hess) {
  const double d = 1.0 + z.squaredNorm();
  const double d2 = d * d;
  const double d3 = d2 * d;
  Eigen::Matrix<double, 3, 2> jac;
  std::array<Eigen::Matrix2d, 3> second;
  for (int b = 0; b < 2; ++b) {
    for (int a = 0; a < 2; ++a) {
      jac(a, b) = 2.0 * (a == b) / d - 4.0 * z(a) * z(b) / d2;
    }
    jac(2, b) = 4.0 * z(b) / d2;
  }
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int c = 0; c < 2; ++c) {
        second[a](b, c) = -4.0 * (a == b) * z(c) / d2 -
                          4.0 * ((a == c) * z(b) + (b == c) * z(a)) / d2 +
                          16.0 * z(a) * z(b) * z(c) / d3;
      }
    }
  }
  for (int b = 0; b < 2; ++b) {
    for (int c = 0; c < 2; ++c) {
      second[2](b, c) = 4.0 * (b == c) / d2 - 16.0 * z(b) * z(c) / d3;
    }
  }
  ChartPartials out;
  out.value = value;
  out.grad = jac.transpose() * grad;
  Eigen::Matrix2d h = jac.transpose() * hess * jac;
  for (int i = 0; i < 3; ++i) h += grad(i) * second[i];
  out.hess = h;
  return out;
}

MetricData metric_at(const MetricModel& model, double t, const Point& y) {
  model.require_time(t);
  model.require_point(y);
  const int n = model.dim();
  MetricData m;
  switch (model.kind()) {
    case ModelKind::EuclideanLine:
    case ModelKind::EuclideanSpace:
    case ModelKind::PuncturedSpace3:
      fill_conformal(m, n, 1.0, 0.0, 0.0, Vec::Zero(n));
      m.ricci = zeros(n);
      break;
    case ModelKind::ConformalCircle:
      fill_conformal(m, 1, model.conformal(t), model.rate(), 0.0, Vec::Zero(1));
      m.ricci = zeros(1);
      break;
    case ModelKind::ConformalSphere2: {
      const double d = 1.0 + y.squaredNorm();
      const double phi = std::log(2.0) - std::log(d);
      Vec dphi = -2.0 * y / d;
      fill_conformal(m, 2, model.conformal(t), model.rate(), phi, dphi);
      // Ric(c g_round) = Ric(g_round) = g_round for the unit sphere.
      m.ricci = Mat::Identity(2, 2) * std::exp(2.0 * phi);
      break;
    }
    case ModelKind::HyperbolicPlaneStatic: {
      const double phi = -std::log(y(1));
      Vec dphi(2);
      dphi << 0.0, -1.0 / y(1);
      fill_conformal(m, 2, 1.0, 0.0, phi, dphi);
      m.ricci = -m.g;
      break;
    }
  }
  return m;
}

namespace {

double max_generalized_eigenvalue(const Mat& a, const Mat& g) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(
      Eigen::MatrixXd(a), Eigen::MatrixXd(g), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double min_generalized_eigenvalue(const Mat& a, const Mat& g) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(
      Eigen::MatrixXd(a), Eigen::MatrixXd(g), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

double super_ricci_gap(const MetricModel& model, double t, const Point& y) {
  const MetricData m = metric_at(model, t, y);
  return max_generalized_eigenvalue(m.dg_dt - 2.0 * m.ricci, m.g);
}

double super_ricci_margin(const MetricModel& model, double t, const Point& y) {
  const MetricData m = metric_at(model, t, y);
  return min_generalized_eigenvalue(2.0 * m.ricci - m.dg_dt, m.g);
}

SuperRicciStatus classify_gap(double gap) noexcept {
  if (gap > kEigenTolerance) return SuperRicciStatus::Violated;
  if (gap < -kEigenTolerance) return SuperRicciStatus::Strict;
  return SuperRicciStatus::Equality;
}

}  // namespace elab
