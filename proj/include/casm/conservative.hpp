#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <nlohmann/json_fwd.hpp>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "casm/active_subspace.hpp"
#include "casm/surrogate.hpp"

namespace casm {

// Tabulated training evaluations: y row k holds the projected point, f row k
// the full-space values f(W1 y_k + W2 z_ik) drawn while training. Sampling
// the signed distance reuses these, so calibration costs no new f calls.
struct SignedDistanceTable {
  Eigen::MatrixXd y;  // s x d
  Eigen::MatrixXd f;  // s x N

  int size() const { return static_cast<int>(y.rows()); }
  int draws_per_point() const { return static_cast<int>(f.cols()); }
};

// Surrogate means over the table rows, split into the unbiased part and the
// kernel weight multiplying the bias: mu_beta(y_k) = base[k] + beta * w[k].
// Affine in beta for both surrogate families, so bias calibration never
// refits.
struct TablePredictions {
  Eigen::VectorXd base;
  Eigen::VectorXd bias_weight;
};

TablePredictions table_predictions(const GprSurrogate& m,
                                   const SignedDistanceTable& table);
TablePredictions table_predictions(const LinearSurrogate& m,
                                   const SignedDistanceTable& table);

struct SignedDistanceSample {
  Eigen::VectorXd values;
  double beta = 0.0;
  std::uint64_t seed = 0;
};

struct TailBoundConfig {
  int bootstrap_resamples = 2000;  // B
  double u_min = 1e-4;             // log-spaced grid for the Chernoff infimum
  double u_max = 1e4;
  int u_grid = 40;
  int draws = 0;  // K; 0 means one draw per tabulated pair (s * N)
  int max_iterations = 60;
};

enum class CalibrationMethod { Chernoff, Bootstrap };

struct BiasCalibration {
  double beta = 0.0;
  double achieved_probability = 0.0;
  CalibrationMethod method = CalibrationMethod::Chernoff;
  int iterations = 0;
  std::vector<std::pair<double, double>> trace;  // (beta_n, estimate)
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

// Calibration cannot reach the requested target (CLI exit code 4). Carries
// the partial trace for diagnosis.
class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(const std::string& msg, BiasCalibration partial)
      : std::runtime_error(msg), partial_result(std::move(partial)) {}
  BiasCalibration partial_result;
};

// Fills the table by conditional sampling at each training location. The f
// values recorded here double as the training data (row means), so the
// whole training + calibration phase costs exactly s * N evaluations of f.
SignedDistanceTable build_table(
    const ActiveSubspace& as, const Domain& dom,
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::MatrixXd& y_tr, int n, std::uint64_t seed);

// Conditional-average training values: row means of the table.
TrainingSet training_from_table(const SignedDistanceTable& table);

SignedDistanceSample sample_signed_distance(const SignedDistanceTable& table,
                                            const TablePredictions& preds,
                                            double beta, int k_draws,
                                            std::uint64_t seed);
SignedDistanceSample sample_signed_distance(const SignedDistanceTable& table,
                                            const GprSurrogate& m, int k_draws,
                                            std::uint64_t seed);

// Mean over resampled-with-replacement means.
double bootstrap_mean(const SignedDistanceSample& s, int resamples,
                      std::uint64_t seed);

// Empirical Chernoff bound on P[|S - center| > eps], minimized over the
// exponent scale u (log grid + golden-section, evaluated in log-sum-exp
// form), clamped to [0, 1].
double chernoff_bound(const SignedDistanceSample& s, double eps, double center,
                      const TailBoundConfig& cfg);

// Bootstrap estimate of P[S > 0]: mean positive fraction over resamples.
double bootstrap_conservativeness(const SignedDistanceSample& s, int resamples,
                                  std::uint64_t seed);

// Bisection on beta until 1 - chernoff_bound is within delta of tau.
BiasCalibration calibrate_chernoff(const SignedDistanceTable& table,
                                   const TablePredictions& preds, double tau,
                                   double delta, double beta_max,
                                   const TailBoundConfig& cfg,
                                   std::uint64_t seed,
                                   bool assumption_holds = true);

// Bisection on beta until the bootstrap conservativeness estimate is within
// delta of tau. Errors out when tau does not exceed the base (beta = 0)
// conservativeness.
BiasCalibration calibrate_bootstrap(const SignedDistanceTable& table,
                                    const TablePredictions& preds, double tau,
                                    double delta, double beta_max,
                                    const TailBoundConfig& cfg,
                                    std::uint64_t seed,
                                    bool assumption_holds = true);

// Fraction of fresh draws x ~ rho with surrogate(W1^T x) >= f(x). Validation
// only; these f calls are accounted separately from the training budget.
double empirical_conservativeness(
    const std::function<double(const Eigen::VectorXd&)>& surrogate_mean,
    const ActiveSubspace& as, const Domain& dom,
    const std::function<double(const Eigen::VectorXd&)>& f, int n,
    std::uint64_t seed);

struct UnfeasibilityRatio {
  double value = 0.0;
  long feasible_count = 0;   // surrogate-feasible draws (the denominator)
  long violating_count = 0;  // of those, draws violating the exact constraint
  bool empty_feasible_set = false;
};

// Proportion of surrogate-feasible points that violate the exact constraint.
UnfeasibilityRatio unfeasibility_ratio(
    const std::function<double(const Eigen::VectorXd&)>& surrogate_mean,
    const ActiveSubspace& as, const Domain& dom,
    const std::function<double(const Eigen::VectorXd&)>& g_exact, int n,
    std::uint64_t seed);

}  // namespace casm
