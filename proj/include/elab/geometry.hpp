#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "elab/types.hpp"

namespace elab {

enum class ModelKind {
  EuclideanLine,
  EuclideanSpace,
  PuncturedSpace3,
  ConformalCircle,
  ConformalSphere2,
  HyperbolicPlaneStatic,
};

struct TimeWindow {
  double t_min = 0.0;
  double t_max = 1e6;

  bool contains(double t) const noexcept { return t >= t_min && t <= t_max; }
  double length() const noexcept { return t_max - t_min; }
  bool operator==(const TimeWindow&) const = default;
};

/// Metric components of g(t) in the model's chart at one (t, y).
struct MetricData {
  Mat g;
  Mat g_inv;
  Mat dg_dt;
  std::array<Mat, 3> christoffel;  // christoffel[k](i, j) = Gamma^k_{ij}
  Mat ricci;
  double sqrt_det_g = 1.0;
  double tr_dg_dt = 0.0;
};

/// Analytic family of time-dependent metrics.
///
/// Conformal models carry g(t) = c(t) g0 with c(t) = c0 + rate * t. Charts:
/// Cartesian for flat spaces, the angle for the circle (periodic), the
/// upper half-plane for the hyperbolic plane, and stereographic projection
/// from the north pole (0, 0, 1) for the 2-sphere.
class MetricModel {
 public:
  static MetricModel euclidean_line(TimeWindow w = {});
  static MetricModel euclidean_space(int n, TimeWindow w = {});
  static MetricModel punctured_space3(TimeWindow w = {});
  static MetricModel conformal_circle(double c0, double rate);
  static MetricModel conformal_circle(double c0, double rate, TimeWindow w);
  static MetricModel conformal_sphere2(double c0, double rate);
  static MetricModel conformal_sphere2(double c0, double rate, TimeWindow w);
  static MetricModel hyperbolic_plane_static(TimeWindow w = {});

  ModelKind kind() const noexcept { return kind_; }
  int dim() const noexcept { return dim_; }
  const TimeWindow& window() const noexcept { return window_; }
  bool is_conformal() const noexcept;
  bool is_compact() const noexcept;

  double c0() const noexcept { return c0_; }
  double rate() const noexcept { return rate_; }
  double conformal(double t) const noexcept { return c0_ + rate_ * t; }
  double min_conformal(double t0, double t1) const noexcept;
  /// s(t) = integral of 1/c over [0, t]; the clock of the time-changed
  /// Brownian motion on conformal models (s(t) = t on static models).
  double clock(double t) const noexcept;

  /// Identifier in the scenario grammar, e.g. "circle:1,-0.1".
  std::string id() const;

  void require_time(double t) const;
  void require_point(const Point& y) const;
  bool in_chart(const Point& y) const noexcept;

  bool operator==(const MetricModel& other) const = default;

 private:
  MetricModel(ModelKind kind, int dim, double c0, double rate, TimeWindow w);

  ModelKind kind_;
  int dim_;
  double c0_ = 1.0;
  double rate_ = 0.0;
  TimeWindow window_;
  bool custom_window_ = false;
};

MetricModel parse_model(std::string_view id);
std::vector<std::string> model_catalog();

MetricData metric_at(const MetricModel& model, double t, const Point& y);

/// Largest eigenvalue of (dg/dt - 2 Ric) in a g(t)-orthonormal frame.
/// Nonpositive means dg/dt <= 2 Ric holds at (t, y).
double super_ricci_gap(const MetricModel& model, double t, const Point& y);
/// Smallest eigenvalue of (2 Ric - dg/dt) in a g(t)-orthonormal frame.
double super_ricci_margin(const MetricModel& model, double t, const Point& y);

enum class SuperRicciStatus { Violated, Equality, Strict };
inline constexpr double kEigenTolerance = 1e-12;
SuperRicciStatus classify_gap(double gap) noexcept;

// Stereographic chart of the unit 2-sphere, projecting from (0, 0, 1).
Vec3 sphere_embed(const Point& z);
Point sphere_chart(const Vec3& y);

struct ChartPartials {
  double value = 0.0;
  Vec grad;
  Mat hess;
};

/// Chart partial derivatives of F(embed(z)) from the ambient value,
/// gradient and Hessian of F at embed(z).
ChartPartials pull_back_sphere(const Point& z, double value, const Vec3& grad,
                               const Eigen::Matrix3d& hess);

}  // namespace elab
