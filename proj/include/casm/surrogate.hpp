#pragma once

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

namespace casm {

// Projected training locations with conditional-average values.
struct TrainingSet {
  Eigen::MatrixXd y;  // s x d
  Eigen::VectorXd f;  // length s

  // Merges duplicate rows of y (within 1e-12) by averaging their f values;
  // exact duplicates make the Gram matrix singular at zero noise.
  static TrainingSet merged(const Eigen::MatrixXd& y, const Eigen::VectorXd& f);

  int size() const { return static_cast<int>(y.rows()); }
  int dim() const { return static_cast<int>(y.cols()); }
};

// Squared-exponential kernel exp(-theta * |y1 - y2|^2) with additive noise.
struct KernelConfig {
  double theta = 1.0;      // inverse squared length-scale, > 0
  double noise_var = 0.0;  // sigma^2 >= 0
};

double kernel_eval(const KernelConfig& cfg, const Eigen::VectorXd& y1,
                   const Eigen::VectorXd& y2);

struct NoisePolicy {
  enum class Kind { FixedDefault, Fixed, Fit };
  Kind kind = Kind::FixedDefault;
  double value = 0.0;

  // sigma^2 = 1e-4 * var(f_tr)
  static NoisePolicy fixed_default() { return {Kind::FixedDefault, 0.0}; }
  static NoisePolicy fixed(double noise_var) { return {Kind::Fixed, noise_var}; }
  static NoisePolicy fit() { return {Kind::Fit, 0.0}; }
};

struct HyperparameterFit {
  KernelConfig config;
  bool degenerate = false;  // constant training values; theta defaulted to 1
};

// Maximizes the log marginal likelihood over a 40-point log grid on
// [1e-3, 1e3], refined by golden-section to 1e-3 relative tolerance.
HyperparameterFit fit_hyperparameters(const TrainingSet& tr,
                                      const NoisePolicy& policy);

struct RowSumReport {
  bool holds = false;
  double min_row_sum = 0.0;
};

// Kernel regressor with precomputed solve weights and a constant upward
// bias applied through the kernel weight vector (shifting the training data
// by beta and refitting gives the same mean).
class GprSurrogate {
 public:
  static GprSurrogate fit(const TrainingSet& tr, const KernelConfig& cfg);

  // k(y, y_tr) * weights + bias * k(y, y_tr) * ones_weights
  double mean(const Eigen::VectorXd& y) const { return mean_at_bias(y, bias_); }
  double mean_at_bias(const Eigen::VectorXd& y, double beta) const;
  // prior variance minus the data correction; independent of the bias,
  // clamped at zero
  double variance(const Eigen::VectorXd& y) const;

  double bias() const { return bias_; }
  GprSurrogate with_bias(double beta) const;

  // Row sums of (K + sigma^2 I)^{-1}; the bias mechanism needs them
  // nonnegative (min_row_sum is the smallest entry of ones_weights).
  RowSumReport check_assumption_rowsums() const;

  const TrainingSet& training() const { return training_; }
  const KernelConfig& kernel() const { return kernel_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const Eigen::VectorXd& ones_weights() const { return ones_weights_; }
  const Eigen::MatrixXd& factor_lower() const { return chol_lower_; }
  double jitter_applied() const { return jitter_; }

  // kernel vector k(y, y_tr)
  Eigen::VectorXd kernel_vector(const Eigen::VectorXd& y) const;

  nlohmann::json to_json() const;
  // weights are recomputed on load, so the solve invariants hold by
  // construction
  static GprSurrogate from_json(const nlohmann::json& j);

 private:
  TrainingSet training_;
  KernelConfig kernel_;
  Eigen::VectorXd weights_;       // (K + sigma^2 I)^{-1} f_tr
  Eigen::VectorXd ones_weights_;  // (K + sigma^2 I)^{-1} 1
  Eigen::MatrixXd chol_lower_;
  double bias_ = 0.0;
  double jitter_ = 0.0;
};

// Ordinary least-squares fit, for constraints that are near-linear on the
// active coordinates.
struct LinearSurrogate {
  Eigen::VectorXd slope;
  double intercept = 0.0;
  double bias = 0.0;

  double predict(const Eigen::VectorXd& y) const {
    return slope.dot(y) + intercept + bias;
  }
  LinearSurrogate with_bias(double beta) const {
    return {slope, intercept, beta};
  }

  nlohmann::json to_json() const;
  static LinearSurrogate from_json(const nlohmann::json& j);
};

LinearSurrogate fit_linear(const TrainingSet& tr);

}  // namespace casm
