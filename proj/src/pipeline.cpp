#include "casm/pipeline.hpp"

#include "casm/errors.hpp"
#include "casm/rng.hpp"

namespace casm {

ConstraintModel build_constraint_model(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const GradientSource& src, const Domain& dom, const PipelineConfig& cfg) {
  if (cfg.train_points < 1 || cfg.inactive_samples < 1)
    throw ConfigError("pipeline: train_points and inactive_samples must be >= 1");

  ConstraintModel m;
  const int mcount =
      cfg.covariance_samples > 0 ? cfg.covariance_samples : 100 * dom.dim();
  CovarianceEstimate cov =
      estimate_covariance(src, dom, mcount, rng::derive(cfg.seed, streams::kCovariance));
  m.covariance_evals = mcount;
  m.subspace = decompose(cov, cfg.subspace_dim);

  // projected training locations from fresh uniform draws over the box
  Eigen::MatrixXd y_tr(cfg.train_points, cfg.subspace_dim);
  {
    std::uint64_t tseed = rng::derive(cfg.seed, streams::kTraining);
    for (int k = 0; k < cfg.train_points; ++k) {
      rng::Rng r(rng::derive(tseed, static_cast<std::uint64_t>(k)));
      y_tr.row(k) = m.subspace.project(dom.sample(r)).transpose();
    }
  }

  long evals = 0;
  auto counted = [&](const Eigen::VectorXd& x) {
    ++evals;
    return f(x);
  };
  m.table = build_table(m.subspace, dom, counted, y_tr, cfg.inactive_samples,
                        rng::derive(cfg.seed, streams::kTable));
  m.training_evals = evals;

  m.training = training_from_table(m.table);
  HyperparameterFit hyper = fit_hyperparameters(m.training, cfg.noise);
  m.kernel = hyper.config;
  m.hyper_degenerate = hyper.degenerate;
  m.surrogate = GprSurrogate::fit(m.training, m.kernel);
  m.predictions = table_predictions(m.surrogate, m.table);
  m.assumption = m.surrogate.check_assumption_rowsums();
  return m;
}

ValidationReport validate_model(
    const std::function<double(const Eigen::VectorXd&)>& surrogate_mean,
    const ActiveSubspace& as, const Domain& dom,
    const std::function<double(const Eigen::VectorXd&)>& f, int n,
    std::uint64_t seed) {
  ValidationReport rep;
  long evals = 0;
  auto counted = [&](const Eigen::VectorXd& x) {
    ++evals;
    return f(x);
  };
  rep.conservativeness = empirical_conservativeness(
      surrogate_mean, as, dom, counted, n, rng::derive(seed, streams::kValidation));
  rep.ur = unfeasibility_ratio(surrogate_mean, as, dom, counted, n,
                               rng::derive(seed, streams::kValidationUr));
  rep.evals = evals;
  return rep;
}

}  // namespace casm
