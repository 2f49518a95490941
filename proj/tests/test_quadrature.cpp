#include <cmath>
#include <numbers>

#include "doctest.h"
#include "elab/quadrature.hpp"

using namespace elab;

TEST_CASE("Gauss-Legendre rule integrates polynomials exactly") {
  const auto& g = gauss_legendre(20);
  double s0 = 0, s38 = 0, s39 = 0;
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    s0 += g.w[i];
    s38 += g.w[i] * std::pow(g.x[i], 38);
    s39 += g.w[i] * std::pow(g.x[i], 39);
  }
  CHECK(s0 == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(s38 == doctest::Approx(2.0 / 39).epsilon(1e-13));
  CHECK(std::abs(s39) < 1e-15);
}

TEST_CASE("kernel mass") {
  const auto line = MetricModel::euclidean_line();
  CHECK(std::abs(kernel_mass(HeatKernelField::canonical(line, make_point({0.0})), 1.0) - 1) < 1e-10);

  const auto shrink = MetricModel::conformal_circle(1, -0.1);
  const auto kc = HeatKernelField::canonical(shrink, make_point({0.0}));
  for (double t : {1e-3, 0.1, 2.0, 9.0}) CHECK(std::abs(kernel_mass(kc, t) - 1) < 1e-8);

  const auto sphere = MetricModel::conformal_sphere2(1, 2);
  const auto ks = HeatKernelField::canonical(sphere, make_point({0.3, 0.1}));
  for (double t : {0.01, 1.0, 10.0}) CHECK(std::abs(kernel_mass(ks, t) - 1) < 1e-8);

  const auto e3 = MetricModel::euclidean_space(3);
  CHECK(std::abs(kernel_mass(HeatKernelField::canonical(e3, make_point({1, 2, 0})), 0.5) - 1) < 1e-8);
  const auto e2 = MetricModel::euclidean_space(2);
  CHECK(std::abs(kernel_mass(HeatKernelField::canonical(e2, make_point({1, 2})), 0.5) - 1) < 1e-8);
}

TEST_CASE("exponential example integrals") {
  const auto line = MetricModel::euclidean_line();
  const auto k = HeatKernelField::canonical(line, make_point({0.0}));
  const auto u = SolutionField::exponential_line(line, 1, 1);
  for (double t : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const auto r = refine_integrals(u, k, t);
    CHECK(r.E.status == Convergence::Stable);
    CHECK(std::abs(r.E.value - t) < 1e-8);
    CHECK(std::abs(r.Eprime.value - 1) < 1e-8);
    CHECK(std::abs(r.Esecond.value) < 1e-10);
    const double c1 = (9 * t * t + 8 * t + 1) * std::exp(2 * t);
    CHECK(std::abs(r.cond1.value / c1 - 1) < 1e-6);
    CHECK(std::abs(r.cond2.value / std::exp(2 * t) - 1) < 1e-6);
    // |grad u|^2 = u^2 and E[u^2] = e^{2t}
    CHECK(std::abs(r.cond0a.value / std::exp(2 * t) - 1) < 1e-6);
  }
  const auto v = SolutionField::exponential_line(line, 2, 3);
  const auto r = refine_integrals(v, k, 0.5);
  CHECK(std::abs(r.E.value - (2 * std::log(2.0) + 9)) < 1e-8);
  CHECK(std::abs(refine_integrals(v, k, 1.0).Eprime.value - 18) < 1e-8);
}

TEST_CASE("sequence classification") {
  CHECK(classify_sequence({1.0, 1.0 + 1e-12}, 0).status == Convergence::Stable);
  CHECK(classify_sequence({1.0, 1.5, 2.0, 2.5}, 0).status == Convergence::Divergent);
  CHECK(classify_sequence({1.0, 1.5, 1.6, 2.0}, 0).status == Convergence::Unstable);
  CHECK(classify_sequence({1.0, INFINITY}, 0).status == Convergence::Divergent);
  CHECK_THROWS_AS(require_stable(classify_sequence({1.0, 2.0}, 0), "x"), Error);
}

TEST_CASE("punctured space: bounded entropy, divergent gradient integral") {
  const auto p3 = MetricModel::punctured_space3();
  const auto u = SolutionField::radial_harmonic3(p3);
  const auto k = HeatKernelField::canonical(p3, make_point({1, 0, 0}));
  const auto r = refine_integrals(u, k, 1.0);
  CHECK(r.E.status == Convergence::Stable);
  CHECK(r.Eprime.status == Convergence::Divergent);
  CHECK(r.mass.status == Convergence::Stable);
  CHECK(std::abs(r.mass.value - 1) < 1e-8);
  // per-decade growth of the gradient integral
  const double slope = 4 * std::numbers::pi * std::pow(4 * std::numbers::pi, -1.5) * std::exp(-0.25) * std::log(10.0);
  const auto& h = r.Eprime.history;
  REQUIRE(h.size() >= 4);
  for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] - h[i - 1] == doctest::Approx(slope).epsilon(0.02));
}
