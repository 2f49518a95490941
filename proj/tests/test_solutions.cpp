#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "elab/solutions.hpp"

using namespace elab;

namespace {

struct Case {
  MetricModel model;
  SolutionField sol;
};

std::vector<Case> catalog() {
  const auto line = MetricModel::euclidean_line();
  const auto circle = MetricModel::conformal_circle(1, 0);
  const auto shrink = MetricModel::conformal_circle(1, -0.1);
  const auto sphere = MetricModel::conformal_sphere2(1, 2);
  const auto p3 = MetricModel::punctured_space3();
  std::vector<Case> out;
  out.push_back({line, SolutionField::constant(line, 5)});
  out.push_back({line, SolutionField::exponential_line(line, 1, 1)});
  out.push_back({line, SolutionField::exponential_line(line, 2, 3)});
  out.push_back({line, SolutionField::exponential_sum(line, {{1, 1}, {1, 2}})});
  out.push_back({circle, SolutionField::circle_spectral(circle, 2, {{1, 0.5, 0}})});
  out.push_back({shrink, SolutionField::circle_spectral(shrink, 2, {{1, 0.5, 0}, {2, 0.2, 1.0}})});
  out.push_back({sphere, SolutionField::sphere_spectral(sphere, 3, {{1, 0.5, Vec3::UnitZ()}, {2, 0.3, Vec3(1, 1, 0)}})});
  out.push_back({p3, SolutionField::radial_harmonic3(p3)});
  return out;
}

Point sample(const MetricModel& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  Point y(m.dim());
  for (int i = 0; i < m.dim(); ++i) y(i) = u(rng);
  if (m.kind() == ModelKind::PuncturedSpace3 && y.norm() < 0.3) y(0) += 1.0;
  return y;
}

}  // namespace

TEST_CASE("exponential jet") {
  const auto m = MetricModel::euclidean_line();
  const auto s = SolutionField::exponential_line(m, 1, 1);
  const auto j = eval_jet(s, 1.0, make_point({1.0}));
  CHECK(j.u == doctest::Approx(1.0));
  CHECK(j.grad_u(0) == doctest::Approx(1.0));
  CHECK(j.hess_log_u.norm() < 1e-15);
  CHECK(j.laplacian_u == doctest::Approx(1.0));
  CHECK(j.du_dt == doctest::Approx(-1.0));
  // central-difference oracle on the closed form
  const auto f = [](double t, double y) { return std::exp(y - t); };
  const double h = 1e-5;
  CHECK(j.grad_u(0) == doctest::Approx((f(1, 1 + h) - f(1, 1 - h)) / (2 * h)).epsilon(1e-8));
  CHECK(j.du_dt == doctest::Approx((f(1 + h, 1) - f(1 - h, 1)) / (2 * h)).epsilon(1e-8));
}

TEST_CASE("constant and radial jets") {
  const auto line = MetricModel::euclidean_line();
  const auto c = eval_jet(SolutionField::constant(line, 5), 3.0, make_point({-2.0}));
  CHECK(c.u == 5.0);
  CHECK(c.grad_u.norm() == 0.0);
  CHECK(c.laplacian_u == 0.0);
  CHECK(c.du_dt == 0.0);

  const auto p3 = MetricModel::punctured_space3();
  const auto r = SolutionField::radial_harmonic3(p3);
  const auto j = eval_jet(r, 0.7, make_point({1, 0, 0}));
  CHECK(j.u == doctest::Approx(1.0));
  CHECK(j.grad_norm_sq == doctest::Approx(1.0));
  CHECK(std::abs(j.laplacian_u) < 1e-14);
  CHECK(j.du_dt == 0.0);
  // oracle: 3-D Laplacian of 1/|y| by 7-point differences
  const Point y = make_point({0.4, -0.3, 0.9});
  const double h = 1e-3;
  double lap = 0;
  for (int i = 0; i < 3; ++i) {
    Point a = y, b = y;
    a(i) += h;
    b(i) -= h;
    lap += (1 / a.norm() - 2 / y.norm() + 1 / b.norm()) / (h * h);
  }
  CHECK(std::abs(lap) < 1e-5);
  CHECK(std::abs(eval_jet(r, 0.7, y).laplacian_u) < 1e-12);
}

TEST_CASE("ValueJet invariants and identities on random samples") {
  std::mt19937_64 rng(42);
  for (const auto& c : catalog()) {
    const TimeWindow w = c.sol.window();
    std::uniform_real_distribution<double> ut(w.t_min + 0.01, std::min(w.t_max, 2.0) - 0.01);
    for (int k = 0; k < 100; ++k) {
      const double t = ut(rng);
      const Point y = sample(c.model, rng);
      const auto j = eval_jet(c.sol, t, y);
      CHECK(j.grad_norm_sq >= 0.0);
      CHECK(backward_residual(c.sol, t, y) <= 1e-10 * (1 + std::abs(j.u) + std::abs(j.du_dt)));
      const auto [r1, r2] = bochner_identities(c.sol, t, y);
      INFO(c.sol.id(), " t=", t);
      CHECK(r1 <= 1e-6);
      CHECK(r2 <= 1e-6);
    }
  }
}

TEST_CASE("sphere jet against an independent evaluation") {
  const auto m = MetricModel::conformal_sphere2(1, 2);
  const auto s = SolutionField::sphere_spectral(m, 3, {{1, 0.5, Vec3::UnitZ()}, {2, 0.3, Vec3(1, 1, 0)}});
  // u(t, z) = 3 + 0.5 e^{2 s} y3 + 0.3 e^{6 s} (3 (n.y)^2 - 1)/2, s = log(1+2t)/2
  const auto u = [](double t, double z1, double z2) {
    const double d = 1 + z1 * z1 + z2 * z2;
    const double y1 = 2 * z1 / d, y2 = 2 * z2 / d, y3 = (d - 2) / d;
    const double s = 0.5 * std::log1p(2 * t);
    const double mu = (y1 + y2) / std::sqrt(2.0);
    return 3 + 0.5 * std::exp(2 * s) * y3 + 0.3 * std::exp(6 * s) * (3 * mu * mu - 1) / 2;
  };
  const double t = 0.4, z1 = 0.3, z2 = -0.8, h = 1e-4;
  const auto cj = s.chart_jet(t, make_point({z1, z2}));
  CHECK(cj.u == doctest::Approx(u(t, z1, z2)).epsilon(1e-13));
  CHECK(cj.du(0) == doctest::Approx((u(t, z1 + h, z2) - u(t, z1 - h, z2)) / (2 * h)).epsilon(1e-7));
  CHECK(cj.du(1) == doctest::Approx((u(t, z1, z2 + h) - u(t, z1, z2 - h)) / (2 * h)).epsilon(1e-7));
  CHECK(cj.d2u(0, 1) ==
        doctest::Approx((u(t, z1 + h, z2 + h) - u(t, z1 + h, z2 - h) - u(t, z1 - h, z2 + h) + u(t, z1 - h, z2 - h)) /
                        (4 * h * h))
            .epsilon(1e-5));
  CHECK(cj.du_dt == doctest::Approx((u(t + h, z1, z2) - u(t - h, z1, z2)) / (2 * h)).epsilon(1e-7));
}

TEST_CASE("positivity horizon of spectral sums") {
  const auto circle = MetricModel::conformal_circle(1, 0);
  // 2 + 0.5 e^{t} cos(theta) reaches 0 at t = ln 4
  const auto s = SolutionField::circle_spectral(circle, 2, {{1, 0.5, 0}});
  CHECK(s.window().t_max == doctest::Approx(std::log(4.0)).epsilon(1e-9));
  CHECK_THROWS_AS(SolutionField::circle_spectral(circle, 0.1, {{1, 0.5, 0}}), Error);
  try {
    (void)s.value(2.0, make_point({0.0}));
    FAIL("expected OutOfWindow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfWindow);
  }
}

TEST_CASE("solution ids round-trip") {
  for (const auto& c : catalog()) {
    const auto again = parse_solution(c.sol.id(), c.model);
    CHECK(again.id() == c.sol.id());
  }
  const auto line = MetricModel::euclidean_line();
  CHECK(parse_solution("expsum:1,1;1,2", line).exp_terms().size() == 2);
  CHECK_THROWS_AS(parse_solution("nonsense", line), Error);
  CHECK_THROWS_AS(parse_solution("radial3", line), Error);
}

TEST_CASE("kernels solve the adjoint equation") {
  const auto line = MetricModel::euclidean_line();
  const auto g = HeatKernelField::canonical(line, make_point({0.0}));
  CHECK(adjoint_residual(g, 0.5, make_point({1.0})) < 1e-8);
  CHECK(g.density(1.0, make_point({0.0})) == doctest::Approx(1 / std::sqrt(4 * std::numbers::pi)));

  const auto shrink = MetricModel::conformal_circle(1, -0.1);
  const auto k = HeatKernelField::canonical(shrink, make_point({0.0}));
  CHECK(adjoint_residual(k, 1.0, make_point({2.0})) < 1e-6);
  CHECK(adjoint_residual(k, 4.0, make_point({0.5})) < 1e-6);

  const auto sphere = MetricModel::conformal_sphere2(1, 2);
  const auto ks = HeatKernelField::canonical(sphere, make_point({0.2, -0.4}));
  for (double t : {0.05, 0.3, 1.0}) CHECK(adjoint_residual(ks, t, make_point({0.5, 0.1})) < 1e-6);
  const auto e3 = HeatKernelField::canonical(MetricModel::euclidean_space(3), make_point({1, 0, 0}));
  CHECK(adjoint_residual(e3, 0.7, make_point({0.2, 0.3, -0.5})) < 1e-8);
  CHECK_THROWS_AS(HeatKernelField::canonical(MetricModel::hyperbolic_plane_static(), make_point({0, 1})), Error);
}

TEST_CASE("wrapped Gaussian branches agree") {
  // image sum and Fourier series must meet at the s = 1 switch
  for (double d : {0.0, 1.0, 3.0, -2.5}) {
    double images = 0, fourier = 1 / (2 * std::numbers::pi);
    for (int k = -50; k <= 50; ++k) images += std::exp(-std::pow(d + 2 * std::numbers::pi * k, 2) / 4) / std::sqrt(4 * std::numbers::pi);
    for (int k = 1; k <= 200; ++k) fourier += std::exp(-double(k) * k) * std::cos(k * d) / std::numbers::pi;
    CHECK(wrapped_gaussian(1.0, d).q == doctest::Approx(images).epsilon(1e-13));
    CHECK(wrapped_gaussian(1.0 + 1e-12, d).q == doctest::Approx(fourier).epsilon(1e-12));
  }
}

TEST_CASE("Legendre recurrences") {
  std::vector<double> p, dp, d2p;
  legendre_series(3, 0.3, p, dp, d2p);
  CHECK(p[2] == doctest::Approx((3 * 0.09 - 1) / 2));
  CHECK(p[3] == doctest::Approx((5 * 0.027 - 3 * 0.3) / 2));
  CHECK(dp[3] == doctest::Approx((15 * 0.09 - 3) / 2));
  CHECK(d2p[3] == doctest::Approx(15 * 0.3));
}
