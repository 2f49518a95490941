#pragma once

#include <algorithm>
#include <cmath>

#include "elab/geometry.hpp"

namespace elab {

template <class F>
double fd_time_derivative(const TimeWindow& w, double t, F&& f) {
  const double H = 1e-4 * std::max(1.0, t);
  if (t - 2.0 * H >= w.t_min && t + 2.0 * H <= w.t_max) {
    return (f(t - 2.0 * H) - 8.0 * f(t - H) + 8.0 * f(t + H) - f(t + 2.0 * H)) / (12.0 * H);
  }
  const double h = 1e-5 * std::max(1.0, t);
  if (t - h >= w.t_min && t + h <= w.t_max) {
    return (f(t + h) - f(t - h)) / (2.0 * h);
  }
  if (t + 2.0 * h <= w.t_max) {
    return (-3.0 * f(t) + 4.0 * f(t + h) - f(t + 2.0 * h)) / (2.0 * h);
  }
  return (3.0 * f(t) - 4.0 * f(t - h) + f(t - 2.0 * h)) / (2.0 * h);
}

template <class F>
double fd_laplacian(const MetricModel& model, double t, const Point& y, F&& f, double h) {
  const int n = static_cast<int>(y.size());
  const auto shifted = [&](int i, double di, int j, double dj) {
    Point p = y;
    p(i) += di;
    p(j) += dj;
    return f(p);
  };
  // Fourth-order stencils.
  const double w1[4] = {1.0, -8.0, 8.0, -1.0};
  const double o1[4] = {-2.0, -1.0, 1.0, 2.0};
  Vec grad(n);
  Mat hess(n, n);
  const double f0 = f(y);
  for (int i = 0; i < n; ++i) {
    double gi = 0.0;
    for (int a = 0; a < 4; ++a) gi += w1[a] * shifted(i, o1[a] * h, i, 0.0);
    grad(i) = gi / (12.0 * h);
    const double d2 = -shifted(i, 2 * h, i, 0.0) + 16.0 * shifted(i, h, i, 0.0) - 30.0 * f0 +
                      16.0 * shifted(i, -h, i, 0.0) - shifted(i, -2 * h, i, 0.0);
    hess(i, i) = d2 / (12.0 * h * h);
    for (int j = 0; j < i; ++j) {
      double mixed = 0.0;
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          mixed += w1[a] * w1[b] * shifted(i, o1[a] * h, j, o1[b] * h);
        }
      }
      hess(i, j) = hess(j, i) = mixed / (144.0 * h * h);
    }
  }
  const MetricData m = metric_at(model, t, y);
  double lap = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double cov = hess(i, j);
      for (int k = 0; k < n; ++k) cov -= m.christoffel[k](i, j) * grad(k);
      lap += m.g_inv(i, j) * cov;
    }
  }
  return lap;
}

}  // namespace elab
