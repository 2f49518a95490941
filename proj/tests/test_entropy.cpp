#include <cmath>
#include <numbers>

#include "doctest.h"
#include "elab/entropy.hpp"

using namespace elab;

namespace {

constexpr double pi = std::numbers::pi;

SdeConfig mc(std::size_t n, double dt = 1e-3) {
  SdeConfig c;
  c.n_paths = n;
  c.dt = dt;
  return c;
}

// E(t) for u = a0 + a1 e^{t} cos(theta) on the static unit circle, kernel at 0,
// by the Fourier form of the wrapped Gaussian and a plain trapezoid rule.
double circle_entropy_oracle(double a0, double a1, double t) {
  const int n = 4096;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double th = -pi + 2 * pi * (i + 0.5) / n;
    double q = 1.0;
    for (int k = 1; k < 60; ++k) q += 2 * std::exp(-k * k * t) * std::cos(k * th);
    q /= 2 * pi;
    const double u = a0 + a1 * std::exp(t) * std::cos(th);
    sum += u * std::log(u) * q;
  }
  return sum * 2 * pi / n;
}

}  // namespace

TEST_CASE("quadrature entropy on closed-form examples") {
  const auto line = MetricModel::euclidean_line();
  const auto k = HeatKernelField::canonical(line, make_point({0.0}));
  CHECK(std::abs(entropy_q(SolutionField::exponential_line(line, 1, 1), k, 1.0) - 1.0) < 1e-8);
  CHECK(std::abs(entropy_q(SolutionField::constant(line, 3.0), k, 0.7) - 3 * std::log(3.0)) < 1e-12);
  CHECK(std::abs(entropy_q(SolutionField::exponential_line(line, 2, 3), k, 0.5) - (2 * std::log(2.0) + 9)) < 1e-8);

  for (double t : {0.3, 1.0, 2.5}) CHECK(std::abs(entropy_prime_q(SolutionField::exponential_line(line, 1, 1), k, t) - 1) < 1e-8);
  CHECK(entropy_prime_q(SolutionField::constant(line, 2.0), k, 1.0) == 0.0);
  CHECK(std::abs(entropy_prime_q(SolutionField::exponential_line(line, 2, 3), k, 1.0) - 18) < 1e-8);
  CHECK(std::abs(entropy_second_q(SolutionField::exponential_line(line, 1, 1), k, 1.0)) < 1e-10);
  CHECK(entropy_second_q(SolutionField::constant(line, 2.0), k, 1.0) == 0.0);
  CHECK_THROWS_AS(entropy_q(SolutionField::constant(line, 2.0), k, 0.0), Error);
}

TEST_CASE("second derivative against an independent circle oracle") {
  const auto circle = MetricModel::conformal_circle(1, 0);
  const auto u = parse_solution("circle-spec:2,(1,0.5)", circle);
  const auto k = HeatKernelField::canonical(circle, make_point({0.0}));
  const double t = 0.25, h = 1e-3;
  const double e0 = circle_entropy_oracle(2, 0.5, t);
  CHECK(std::abs(entropy_q(u, k, t) - e0) < 1e-9);
  const double d2 = (circle_entropy_oracle(2, 0.5, t + h) - 2 * e0 + circle_entropy_oracle(2, 0.5, t - h)) / (h * h);
  const double es = entropy_second_q(u, k, t);
  CHECK(es > 0.0);
  CHECK(std::abs(es - d2) < 1e-4);
  const double d1 = (circle_entropy_oracle(2, 0.5, t + h) - circle_entropy_oracle(2, 0.5, t - h)) / (2 * h);
  CHECK(std::abs(entropy_prime_q(u, k, t) - d1) < 1e-5);
}

TEST_CASE("finite differences at a fixed level match the derivative formulas") {
  struct Case {
    MetricModel model;
    std::string solution;
    Point x;
    double t;
  };
  const std::vector<Case> cases = {
      {MetricModel::euclidean_line(), "expsum:1,1;1,2", make_point({0.2}), 0.6},
      {MetricModel::conformal_circle(1, -0.1), "circle-spec:2,(1,0.5),(2,0.05,0.3)", make_point({0.4}), 0.5},
      {MetricModel::conformal_sphere2(1, 2), "sphere-spec:2,(1,0.5)", make_point({0.3, -0.4}), 0.4},
  };
  const double h = 1e-3;
  for (const auto& c : cases) {
    CAPTURE(c.solution);
    const auto u = parse_solution(c.solution, c.model);
    const auto k = HeatKernelField::canonical(c.model, c.x);
    const auto r = refine_integrals(u, k, c.t);
    const int lvl = r.E.level;
    const double em = entropy_at_level(u, k, c.t - h, lvl), e0 = entropy_at_level(u, k, c.t, lvl),
                 ep = entropy_at_level(u, k, c.t + h, lvl);
    CHECK(std::abs((ep - em) / (2 * h) - entropy_prime_q(u, k, c.t)) < 1e-5);
    CHECK(std::abs((ep - 2 * e0 + em) / (h * h) - entropy_second_q(u, k, c.t)) < 1e-4);
  }
}

TEST_CASE("condition integrals") {
  const auto line = MetricModel::euclidean_line();
  const auto k = HeatKernelField::canonical(line, make_point({0.0}));
  const auto u = SolutionField::exponential_line(line, 1, 1);
  const auto c = conditions(u, k, 1.0);
  CHECK(c.finite());
  CHECK(c.cond1.value / (18 * std::exp(2.0)) == doctest::Approx(1).epsilon(1e-6));
  CHECK(c.cond2.value / std::exp(2.0) == doctest::Approx(1).epsilon(1e-6));
  CHECK(std::abs(conditions(u, k, 0.5).cond1.value - 7.25 * std::exp(1.0)) < 1e-6 * 7.25 * std::exp(1.0));
  const auto z = conditions(SolutionField::constant(line, 4.0), k, 1.0);
  CHECK(z.cond1.value == 0.0);
  CHECK(z.cond2.value == 0.0);
  CHECK(z.cond0a.value == 0.0);

  const auto p3 = MetricModel::punctured_space3();
  const auto r = conditions(SolutionField::radial_harmonic3(p3), HeatKernelField::canonical(p3, make_point({1, 0, 0})), 1.0);
  CHECK(r.cond0a.divergent);
  CHECK(std::isinf(r.cond0a.value));
  CHECK(!r.finite());
}

TEST_CASE("Monte Carlo entropy") {
  const auto line = MetricModel::euclidean_line();
  SimulationPlan plan;
  plan.record_times = {0.5, 1.0};
  const auto e = simulate(line, make_point({0.0}), 1.0, mc(20000), plan);
  const auto u = SolutionField::exponential_line(line, 1, 1);
  const auto E = entropy_mc(u, e, 1.0);
  CHECK(std::abs(E.mean - 1.0) <= 3 * E.std_error);
  const auto Ep = entropy_prime_mc(u, e, 0.5);
  CHECK(std::abs(Ep.mean - 1.0) <= 3 * Ep.std_error);
  const auto Es = entropy_second_mc(u, e, 0.5);
  CHECK(std::abs(Es.mean) < 1e-9);
  const auto one = entropy_mc(SolutionField::constant(line, 1.0), e, 1.0);
  CHECK(one.mean == 0.0);
  CHECK(one.std_error == 0.0);

  const auto k = HeatKernelField::canonical(line, make_point({0.0}));
  const auto cq = entropy_curve_q(u, k, {0.5, 1.0});
  const auto cm = entropy_curve_mc(u, e, {0.5, 1.0});
  CHECK(max_z_score(cq, cm) <= 3.0);
  CHECK(cq.points[1].conditions.has_value());
  CHECK(cq.points[1].method == Method::Quadrature);
  CHECK(cm.points[0].method == Method::MonteCarlo);
}

TEST_CASE("local entropies") {
  const auto line = MetricModel::euclidean_line();
  const auto u = SolutionField::exponential_line(line, 1, 1);
  std::vector<DomainSpec> doms;
  for (int n = 1; n <= 4; ++n) doms.push_back(DomainSpec::interval(-n, n));
  SimulationPlan plan;
  plan.domains = doms;
  const auto e = simulate(line, make_point({0.0}), 1.0, mc(10000), plan);
  const std::vector<double> ts = {0.25, 0.5, 0.75, 1.0};
  const auto tab = local_entropy(u, e, doms, ts);
  CHECK(tab.monotone());
  CHECK(tab.E_D.size() == 4);
  CHECK(tab.E_D[0][3].mean < tab.E_D[3][3].mean);
  CHECK(tab.E_M.size() == ts.size());
  // the innermost domain is exited by most paths before t = 1
  CHECK(tab.E_D_exit[0].error.empty());
  CHECK(!tab.E_D_exit[3].error.empty());

  // start outside: frozen at the initial value
  const auto outside = local_entropy(u, e, {DomainSpec::interval(1, 2)}, ts);
  for (const auto& est : outside.E_D[0]) {
    CHECK(est.mean == 0.0);
    CHECK(est.std_error == 0.0);
  }

  const auto id = local_entropy_identity(u, e, doms[0], 1.0);
  CHECK(id.holds());
  CHECK(id.lhs.mean > 0.0);

  const auto diag = exit_fisher_diagnostic(u, e, doms, 1.0);
  REQUIRE(diag.size() == 4);
  for (const auto& d : diag) CHECK(d.mean >= 0.0);
}

TEST_CASE("stopped identities on the compact circle") {
  const auto circle = MetricModel::conformal_circle(1, 0);
  const auto u = parse_solution("circle-spec:2,(1,0.5)", circle);
  SimulationPlan plan;
  const auto arc = DomainSpec::interval(-1.0, 1.0);
  const auto whole = DomainSpec::interval(-pi, pi);
  plan.domains = {arc, whole};
  plan.record_times.clear();
  for (int i = 1; i <= 200; ++i) plan.record_times.push_back(i * 0.0025);
  const auto e = simulate(circle, make_point({0.0}), 0.5, mc(10000), plan);
  const auto s2 = stopped_second_identity(u, e, arc, 0.5);
  CHECK(s2.holds());
  CHECK(local_entropy_identity(u, e, arc, 0.5).holds());

  // no exits from the whole circle: the local entropy is the plain one
  const auto tab = local_entropy(u, e, {whole}, {0.25, 0.5});
  const auto plain = entropy_mc(u, e, 0.5);
  CHECK(tab.E_D[0][1].mean == plain.mean);
}

TEST_CASE("submartingale gaps") {
  const auto line = MetricModel::euclidean_line();
  SimulationPlan plan;
  plan.record_times = {0.5, 1.0};
  const auto e = simulate(line, make_point({0.0}), 1.0, mc(20000), plan);
  const auto c = submartingale_gap(SolutionField::constant(line, 2.0), e, 1.0);
  CHECK(c.gap == 0.0);
  CHECK(c.std_error == 0.0);
  const auto u = SolutionField::exponential_line(line, 1, 1);
  const auto g = submartingale_gap(u, e, 1.0);
  CHECK(std::abs(g.gap) <= 3 * g.std_error);
  const auto mid = submartingale_gap_midpoint(u, e, 1.0);
  CHECK(std::abs(mid.gap) <= 3 * mid.std_error);
  const auto k = HeatKernelField::canonical(line, make_point({0.0}));
  CHECK(std::abs(submartingale_gap_q(u, k, 1.0).gap) < 1e-8);

  const auto shrink = MetricModel::conformal_circle(1, -0.1);
  const auto v = parse_solution("circle-spec:2,(1,0.5)", shrink);
  const auto ec = simulate(shrink, make_point({0.0}), 0.5, mc(20000));
  const auto gc = submartingale_gap(v, ec, 0.5);
  CHECK(gc.gap >= -3 * gc.std_error);
  CHECK(submartingale_gap_q(v, HeatKernelField::canonical(shrink, make_point({0.0})), 0.5).gap > 0.0);
}
