#pragma once

#include <cstdint>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "elab/geometry.hpp"

namespace elab {

enum class Scheme { EulerMaruyama, ProjectedSphere };

/// How exits between grid points are detected.
///   GridCrossing: first grid time outside D, state taken as is (overshoot bias O(sqrt dt)).
///   BrownianBridge: additionally flags a crossing inside a step with the
///     bridge probability exp(-d0 d1 / (sigma^2 dt)) and places the exit state on the boundary.
enum class ExitPolicy { GridCrossing, BrownianBridge };

inline constexpr std::uint64_t kDefaultSeed = 0xC0FFEE;

struct SdeConfig {
  double dt = 1e-3;
  std::size_t n_paths = 10000;
  std::uint64_t seed = kDefaultSeed;
  Scheme scheme = Scheme::EulerMaruyama;
  ExitPolicy exit_policy = ExitPolicy::BrownianBridge;
  unsigned threads = 0;  // 0: hardware concurrency
};

/// Scheme a model uses unless configured otherwise.
Scheme default_scheme(const MetricModel& model) noexcept;

struct DomainSpec {
  enum class Kind { Interval, Ball, Cap };
  Kind kind = Kind::Interval;
  double a = 0.0, b = 0.0;  // Interval (on the circle: an arc of angles, b - a >= 2 pi is the whole circle)
  Point center;             // Ball
  double radius = 0.0;      // Ball
  Vec3 axis = Vec3::UnitZ();  // Cap
  double angle = 0.0;         // Cap: geodesic radius on the unit sphere

  static DomainSpec interval(double a, double b);
  static DomainSpec ball(Point center, double radius);
  static DomainSpec cap(Vec3 axis, double angle);

  /// Throws ConfigError unless the domain fits the model and is relatively compact in the chart.
  void validate(const MetricModel& model) const;
  std::string id() const;
};

DomainSpec parse_domain(std::string_view id);

/// Signed distance to the boundary (positive inside), measured in the geometry
/// used for bridge corrections; `state` is a stored state (embedding on the sphere).
double domain_depth(const MetricModel& model, const DomainSpec& d, const Vec& state);
bool domain_contains(const MetricModel& model, const DomainSpec& d, const Vec& state);

enum class ExitStatus { Exited, Censored, StartedOutside };

struct ExitRecord {
  double tau = 0.0;  // horizon for censored paths
  Vec state;         // stored state at tau (at the horizon when censored)
  ExitStatus status = ExitStatus::Censored;
};

struct SimulationPlan {
  std::vector<double> record_times;  // snapped to the step grid; empty: 64 uniform intervals
  std::vector<DomainSpec> domains;   // tracked on every step
};

/// Monte Carlo sample paths of g(t)-Brownian motion (generator Laplacian_{g(t)}).
/// States are stored in the chart, except on the sphere where the unit embedding is stored.
class PathEnsemble {
 public:
  const MetricModel& model() const noexcept { return model_; }
  const Point& start() const noexcept { return start_; }
  const SdeConfig& config() const noexcept { return cfg_; }
  double step() const noexcept { return step_; }
  double horizon() const noexcept { return times_.back(); }
  const std::vector<double>& times() const noexcept { return times_; }
  std::size_t n_paths() const noexcept { return n_paths_; }
  int state_dim() const noexcept { return state_dim_; }

  /// Index of grid time t; throws InvalidArgument if t is not on the grid.
  std::size_t time_index(double t) const;
  Vec state(std::size_t path, std::size_t time_index) const;
  /// Chart point of a stored state.
  Point chart(const Vec& state) const;
  double blowup_time(std::size_t path) const { return blowup_[path]; }
  std::size_t n_blown_up(double t) const;

  const std::vector<DomainSpec>& domains() const noexcept { return domains_; }
  /// Exit records of a registered domain, or of an unregistered one from the recorded grid.
  std::vector<ExitRecord> exits(const DomainSpec& d) const;
  const std::vector<ExitRecord>& exits(std::size_t domain_index) const { return exits_.at(domain_index); }
  std::size_t domain_index(const DomainSpec& d) const;  // npos if unregistered

  const std::vector<double>& raw() const noexcept { return data_; }

 private:
  friend PathEnsemble simulate(const MetricModel&, const Point&, double, const SdeConfig&, const SimulationPlan&);
  friend PathEnsemble read_ensemble(const std::string&);

  PathEnsemble(MetricModel model) : model_(std::move(model)) {}

  MetricModel model_;
  Point start_;
  SdeConfig cfg_;
  double step_ = 0.0;
  std::vector<double> times_;
  std::vector<std::size_t> steps_;  // step index of each recorded time
  std::size_t n_paths_ = 0;
  int state_dim_ = 1;
  std::vector<double> data_;  // [path][time][coord]
  std::vector<double> blowup_;
  std::vector<DomainSpec> domains_;
  std::vector<std::vector<ExitRecord>> exits_;
};

PathEnsemble simulate(const MetricModel& model, const Point& x, double horizon, const SdeConfig& cfg,
                      const SimulationPlan& plan = {});
/// Step count simulate uses (dt shrinks on conformal models so each step moves the clock by <= dt).
std::size_t simulation_steps(const MetricModel& model, double horizon, double dt);

/// Drift -g^{ij} Gamma^k_{ij} and a square root sigma of g^{-1} at (t, y), from metric_at.
void sde_coefficients(const MetricModel& model, double t, const Point& y, Vec& drift, Mat& sigma);

std::vector<ExitRecord> first_exit(const PathEnsemble& e, const DomainSpec& d);

using Observable = std::function<double(double t, const Point& y)>;

struct Observation {
  enum class Kind { AtTime, Stopped, AtExit };
  Kind kind = Kind::AtTime;
  double t = 0.0;
  DomainSpec domain;

  static Observation at_time(double t) { return {Kind::AtTime, t, {}}; }
  static Observation stopped(double t, const DomainSpec& d) { return {Kind::Stopped, t, d}; }
  static Observation at_exit(const DomainSpec& d) { return {Kind::AtExit, 0.0, d}; }
};

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  double censored_fraction = 0.0;
};

/// Per-path values f at the observed (time, state); NaN marks censored paths in AtExit mode.
std::vector<double> sample_values(const PathEnsemble& e, const Observable& f, const Observation& obs);
Estimate summarize(const std::vector<double>& values);
Estimate expect(const PathEnsemble& e, const Observable& f, const Observation& obs);

/// Kolmogorov-Smirnov distance of samples against a continuous cdf.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(double(n)); }

void write_ensemble(const std::string& path, const PathEnsemble& e);
PathEnsemble read_ensemble(const std::string& path);

}  // namespace elab
