#pragma once

#include <Eigen/Core>
#include <functional>
#include <nlohmann/json_fwd.hpp>
#include <optional>

#include "casm/domain.hpp"
#include "casm/errors.hpp"
#include "casm/gradient_source.hpp"

namespace casm {

// The biased reduced feasible set can be empty when the constraint is
// over-biased; callers typically flag the run and continue.
class ReducedInfeasibleError : public NumericError {
 public:
  using NumericError::NumericError;
};

struct PullbackResult {
  Eigen::VectorXd x;
  double residual_y_f = 0.0;  // |y_F - U1^T x|
  double residual_y_g = 0.0;  // |y_G - W1^T x|
  double box_dist = 0.0;      // dist(x, X)
  double kkt_residual = 0.0;  // stationarity residual of the min-norm QP
  bool feasible = false;
};

// Minimum-norm x with U1^T x = y_F, W1^T x = y_G, x in the box. Solved by
// the equality-constrained least-norm solution, then Dykstra alternating
// projections (affine set <-> box) when the box is active; inconsistent
// targets yield an infeasible result rather than an exception.
PullbackResult pullback(const Eigen::VectorXd& y_f, const Eigen::VectorXd& y_g,
                        const Eigen::MatrixXd& u1, const Eigen::MatrixXd& w1,
                        const Domain& dom, double tol = 1e-6);

// |y_F - U1^T x*| + |y_G - W1^T x*| + dist(x*, X); zero exactly when the
// two reduced points are projections of one feasible full-space point.
double coupling(const Eigen::VectorXd& y_f, const Eigen::VectorXd& y_g,
                const PullbackResult& result);

struct ReducedProblem {
  std::function<double(const Eigen::VectorXd&)> objective;   // over U1 coords
  Eigen::MatrixXd u1;                                        // D x d_F
  std::function<double(const Eigen::VectorXd&)> constraint;  // feasible <= 0
  Eigen::MatrixXd w1;                                        // D x d_G
  Domain domain;
  double coupling_tol = 1e-6;
};

struct ReducedSolverConfig {
  int grid_points = 401;  // per reduced dimension
  int refine_iterations = 60;
  int refine_sweeps = 2;
};

struct ReducedTraceSummary {
  long grid_total = 0;
  long grid_pullback_ok = 0;
  long grid_feasible = 0;
  long refine_evals = 0;
};

struct ReducedSolution {
  Eigen::VectorXd y_f;
  Eigen::VectorXd y_g;
  Eigen::VectorXd x;
  double objective_value = 0.0;
  double constraint_value = 0.0;  // surrogate constraint at y_g
  double coupling_value = 0.0;
  ReducedTraceSummary trace;

  nlohmann::json to_json(
      std::optional<double> constraint_value_exact = std::nullopt) const;
};

// Dense grid over the projected domain of the objective map; each candidate
// y_F is tied to y_G through the min-norm pullback of y_F alone, which makes
// the coupling vanish by construction. Golden-section refinement around the
// best cell.
ReducedSolution solve_reduced(const ReducedProblem& problem,
                              const ReducedSolverConfig& cfg = {});

struct FullSolverConfig {
  int max_outer = 30;
  int max_inner = 400;
  double kkt_tol = 1e-5;
  double initial_penalty = 10.0;
  double penalty_growth = 10.0;
  std::optional<Eigen::VectorXd> start;  // default: box center
};

struct FullSolution {
  Eigen::VectorXd x;
  double value = 0.0;
  double constraint_value = 0.0;
  double kkt_residual = 0.0;
  int outer_iterations = 0;
  bool converged = false;
};

using ObjectiveFn = std::function<GradientSample(const Eigen::VectorXd&)>;

// Full-space baseline: augmented Lagrangian with a projected-gradient inner
// loop for min f(x) s.t. g(x) <= 0, x in the box.
FullSolution solve_full(const ObjectiveFn& objective,
                        const ObjectiveFn& constraint, const Domain& dom,
                        const FullSolverConfig& cfg = {});

}  // namespace casm
