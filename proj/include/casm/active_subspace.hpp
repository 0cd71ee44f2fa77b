#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <nlohmann/json_fwd.hpp>
#include <vector>

#include "casm/domain.hpp"
#include "casm/gradient_source.hpp"

namespace casm {

// Monte Carlo estimate of the gradient outer-product covariance.
struct CovarianceEstimate {
  Eigen::MatrixXd matrix;  // D x D, symmetric, PSD up to roundoff
  int sample_count = 0;

  int dim() const { return static_cast<int>(matrix.rows()); }
  std::string to_csv() const;
};

// Orthonormal split of the input space into active (W1) and inactive (W2)
// directions, with the covariance spectrum.
struct ActiveSubspace {
  Eigen::MatrixXd w1;           // D x d
  Eigen::MatrixXd w2;           // D x (D-d)
  Eigen::VectorXd eigenvalues;  // length D, nonincreasing
  int d = 0;
  // set when lambda_d and lambda_{d+1} coincide to within 1e-12: the split
  // is valid but not unique
  bool degenerate_gap = false;

  int dim() const { return static_cast<int>(w1.rows()); }
  Eigen::VectorXd project(const Eigen::VectorXd& x) const { return w1.transpose() * x; }
  Eigen::VectorXd lift(const Eigen::VectorXd& y, const Eigen::VectorXd& z) const {
    return w1 * y + w2 * z;
  }

  nlohmann::json to_json() const;
  static ActiveSubspace from_json(const nlohmann::json& j);
};

CovarianceEstimate estimate_covariance(const GradientSource& src,
                                       const Domain& dom, int sample_count,
                                       std::uint64_t seed);

// Top-d eigenvectors become W1; eigenvector signs are fixed so the
// largest-magnitude entry of each column is positive.
ActiveSubspace decompose(const CovarianceEstimate& cov, int d);

// Percentage of gradient variance captured by the active directions.
double variance_captured(const ActiveSubspace& as);

// Uniform samples of the inactive coordinate on the slice
// {z : W1 y + W2 z in X}. Exact interval sampling when the slice is
// one-dimensional, hit-and-run otherwise.
std::vector<Eigen::VectorXd> sample_inactive(const ActiveSubspace& as,
                                             const Domain& dom,
                                             const Eigen::VectorXd& y, int n,
                                             std::uint64_t seed);

// Conditional-average estimator of f over the inactive subspace at y.
double f_mc(const ActiveSubspace& as, const Domain& dom,
            const std::function<double(const Eigen::VectorXd&)>& f,
            const Eigen::VectorXd& y, int n, std::uint64_t seed);

// Componentwise range of a column-orthonormal map's projection of the box
// (the bounding box of {B^T x : x in X}).
std::pair<Eigen::VectorXd, Eigen::VectorXd> projected_range(
    const Eigen::MatrixXd& map, const Domain& dom);

}  // namespace casm
