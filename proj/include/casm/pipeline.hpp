#pragma once

#include <cstdint>
#include <functional>

#include "casm/active_subspace.hpp"
#include "casm/conservative.hpp"
#include "casm/domain.hpp"
#include "casm/gradient_source.hpp"
#include "casm/surrogate.hpp"

namespace casm {

// Stream ids for deriving sub-seeds from one master seed. Every randomized
// stage owns a stream, so stages are individually reproducible and
// insensitive to each other's sample counts.
namespace streams {
constexpr std::uint64_t kCovariance = 1;
constexpr std::uint64_t kTraining = 2;
constexpr std::uint64_t kTable = 3;
constexpr std::uint64_t kCalibration = 4;
constexpr std::uint64_t kValidation = 5;
constexpr std::uint64_t kValidationUr = 6;
constexpr std::uint64_t kObjective = 7;
}  // namespace streams

struct PipelineConfig {
  int covariance_samples = 0;  // M; 0 selects 100 * D
  int subspace_dim = 1;        // d
  int train_points = 50;       // s
  int inactive_samples = 10;   // N
  NoisePolicy noise = NoisePolicy::fixed_default();
  std::uint64_t seed = 0;
};

// Subspace, tabulated training data and fitted surrogate for one expensive
// constraint. training_evals counts the exact-f calls spent building it
// (exactly s * N); calibration adds none.
struct ConstraintModel {
  ActiveSubspace subspace;
  SignedDistanceTable table;
  TrainingSet training;
  KernelConfig kernel;
  GprSurrogate surrogate;  // bias 0
  TablePredictions predictions;
  RowSumReport assumption;
  bool hyper_degenerate = false;
  long covariance_evals = 0;
  long training_evals = 0;
};

ConstraintModel build_constraint_model(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const GradientSource& src, const Domain& dom, const PipelineConfig& cfg);

struct ValidationReport {
  double conservativeness = 0.0;
  UnfeasibilityRatio ur;
  long evals = 0;
};

// Fresh-sample validation of a calibrated surrogate against the exact
// constraint; the f calls here are counted apart from the training budget.
ValidationReport validate_model(
    const std::function<double(const Eigen::VectorXd&)>& surrogate_mean,
    const ActiveSubspace& as, const Domain& dom,
    const std::function<double(const Eigen::VectorXd&)>& f, int n,
    std::uint64_t seed);

}  // namespace casm
