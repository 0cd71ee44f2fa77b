#pragma once

#include <Eigen/Core>

#include "casm/errors.hpp"
#include "casm/rng.hpp"

namespace casm {

enum class Density { Uniform };

// Axis-aligned box X together with the sampling measure rho on it.
struct Domain {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Density density = Density::Uniform;

  static Domain box(Eigen::VectorXd lo, Eigen::VectorXd hi);
  // [-half_width, half_width]^dim
  static Domain symmetric(int dim, double half_width = 1.0);
  // [0, 1]^dim
  static Domain unit(int dim);

  int dim() const { return static_cast<int>(lower.size()); }
  void validate() const;

  bool contains(const Eigen::VectorXd& x, double slack = 0.0) const;
  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const;
  // Euclidean distance from x to the box.
  double box_distance(const Eigen::VectorXd& x) const;
  // One draw from rho.
  Eigen::VectorXd sample(rng::Rng& r) const;
};

inline Domain Domain::box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
  Domain d{std::move(lo), std::move(hi), Density::Uniform};
  d.validate();
  return d;
}

inline Domain Domain::symmetric(int dim, double half_width) {
  return box(Eigen::VectorXd::Constant(dim, -half_width),
             Eigen::VectorXd::Constant(dim, half_width));
}

inline Domain Domain::unit(int dim) {
  return box(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim));
}

inline void Domain::validate() const {
  if (lower.size() < 1 || lower.size() != upper.size())
    throw ConfigError("domain: need matching lower/upper bounds, dim >= 1");
  for (int i = 0; i < dim(); ++i)
    if (!(lower[i] < upper[i]))
      throw ConfigError("domain: lower[" + std::to_string(i) +
                        "] must be < upper[" + std::to_string(i) + "]");
}

inline bool Domain::contains(const Eigen::VectorXd& x, double slack) const {
  for (int i = 0; i < dim(); ++i)
    if (x[i] < lower[i] - slack || x[i] > upper[i] + slack) return false;
  return true;
}

inline Eigen::VectorXd Domain::clamp(const Eigen::VectorXd& x) const {
  return x.cwiseMax(lower).cwiseMin(upper);
}

inline double Domain::box_distance(const Eigen::VectorXd& x) const {
  return (x - clamp(x)).norm();
}

inline Eigen::VectorXd Domain::sample(rng::Rng& r) const {
  Eigen::VectorXd x(dim());
  for (int i = 0; i < dim(); ++i) x[i] = r.uniform(lower[i], upper[i]);
  return x;
}

}  // namespace casm
