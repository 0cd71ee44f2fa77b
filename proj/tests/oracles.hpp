// Test-only oracles: quadrature, analytic covariances and finite
// differences. Everything here is independent of the library's sampling and
// linear algebra paths it is used to check.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace oracles {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on the
// Legendre recurrence.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(
    int n) {
  std::vector<double> x(static_cast<size_t>(n)), w(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) {
        double pprev = 1.0, pcur = t;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2.0 * k - 1.0) * t * pcur - (k - 1.0) * pprev) / k;
          pprev = pcur;
          pcur = p2;
        }
        double d = n * (t * pcur - pprev) / (t * t - 1.0);
        x[static_cast<size_t>(i)] = t;
        w[static_cast<size_t>(i)] = 2.0 / ((1.0 - t * t) * d * d);
        break;
      }
    }
  }
  return {x, w};
}

inline double integrate_1d(const std::function<double(double)>& f, double a,
                           double b, int n = 64) {
  auto [x, w] = gauss_legendre(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    acc += w[static_cast<size_t>(i)] *
           f(0.5 * (b - a) * x[static_cast<size_t>(i)] + 0.5 * (a + b));
  return 0.5 * (b - a) * acc;
}

inline double integrate_box2d(const std::function<double(double, double)>& f,
                              double ax, double bx, double ay, double by,
                              int n = 64) {
  auto [x, w] = gauss_legendre(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double xi = 0.5 * (bx - ax) * x[static_cast<size_t>(i)] + 0.5 * (ax + bx);
      double yj = 0.5 * (by - ay) * x[static_cast<size_t>(j)] + 0.5 * (ay + by);
      acc += w[static_cast<size_t>(i)] * w[static_cast<size_t>(j)] * f(xi, yj);
    }
  return 0.25 * (bx - ax) * (by - ay) * acc;
}

// Mean of grad f outer grad f under the uniform measure on [-1,1]^2,
// computed by dense quadrature.
inline Eigen::Matrix2d gradient_covariance_2d(
    const std::function<Eigen::Vector2d(double, double)>& grad, int n = 64) {
  Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
  for (int a = 0; a < 2; ++a)
    for (int b = a; b < 2; ++b) {
      double v = integrate_box2d(
                     [&](double x, double y) {
                       Eigen::Vector2d g = grad(x, y);
                       return g[a] * g[b];
                     },
                     -1, 1, -1, 1, n) /
                 4.0;
      c(a, b) = v;
      c(b, a) = v;
    }
  return c;
}

// Central finite differences of a scalar function of a vector.
inline Eigen::VectorXd fd_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

// Degree-5 7-point triangle rule (weights sum to 1, applied times area).
inline double integrate_triangle(
    const std::function<double(double, double)>& f, const Eigen::Vector2d& p0,
    const Eigen::Vector2d& p1, const Eigen::Vector2d& p2) {
  static const double w0 = 9.0 / 40.0;
  static const double a1 = 0.059715871789770, b1 = 0.470142064105115;
  static const double w1 = 0.132394152788506;
  static const double a2 = 0.797426985353087, b2 = 0.101286507323456;
  static const double w2 = 0.125939180544827;
  const double bary[7][3] = {
      {1.0 / 3, 1.0 / 3, 1.0 / 3}, {a1, b1, b1}, {b1, a1, b1}, {b1, b1, a1},
      {a2, b2, b2},                {b2, a2, b2}, {b2, b2, a2}};
  const double wts[7] = {w0, w1, w1, w1, w2, w2, w2};
  double area = 0.5 * std::abs((p1.x() - p0.x()) * (p2.y() - p0.y()) -
                               (p2.x() - p0.x()) * (p1.y() - p0.y()));
  double acc = 0.0;
  for (int q = 0; q < 7; ++q) {
    Eigen::Vector2d p =
        bary[q][0] * p0 + bary[q][1] * p1 + bary[q][2] * p2;
    acc += wts[q] * f(p.x(), p.y());
  }
  return acc * area;
}

}  // namespace oracles
