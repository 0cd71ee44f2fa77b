#include "casm/thermal_pipeline.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "casm/errors.hpp"
#include "casm/io.hpp"
#include "casm/pipeline.hpp"
#include "casm/rng.hpp"

namespace casm {

TransmissionProblem::TransmissionProblem(int mesh_n, double k1, double k2)
    : mesh_(build_mesh(mesh_n)), k1_(k1), k2_(k2) {}

double TransmissionProblem::energy_at(const Eigen::VectorXd& theta) const {
  DesignField field = DesignField::clamped(theta);
  return assemble_solve(mesh_, field, k1_, k2_, default_source).energy;
}

GradientSample TransmissionProblem::energy_and_gradient(
    const Eigen::VectorXd& theta) const {
  DesignField field = DesignField::clamped(theta);
  FemSolution sol = assemble_solve(mesh_, field, k1_, k2_, default_source);
  GradientSample out;
  out.value = sol.energy;
  out.gradient = energy_gradient(sol, mesh_, field, k1_, k2_);
  return out;
}

double TransmissionProblem::volume_at(const Eigen::VectorXd& theta) const {
  return volume(mesh_, DesignField::clamped(theta));
}

Eigen::VectorXd TransmissionProblem::volume_gradient() const {
  Eigen::VectorXd areas(mesh_.element_count());
  for (int e = 0; e < mesh_.element_count(); ++e)
    areas[e] = mesh_.areas[static_cast<size_t>(e)];
  return areas;
}

namespace {

Eigen::VectorXd theta_of(const Eigen::VectorXd& t) {
  return ((t.array() + 1.0) * 0.5).matrix();
}

}  // namespace

ThermalReport run_thermal_pipeline(const ThermalConfig& cfg) {
  TransmissionProblem prob(cfg.mesh_n, cfg.k1, cfg.k2);
  const int dim = prob.design_dim();
  // the subspace machinery works on [-1,1]^D; designs are rescaled per
  // coordinate and gradients chain-ruled by the constant factor 1/2
  Domain tbox = Domain::symmetric(dim, 1.0);

  ThermalReport rep;
  rep.mesh_n = cfg.mesh_n;
  rep.e_max = cfg.e_max;

  long training_evals = 0;

  GradientSource g_src = GradientSource::analytic([&](const Eigen::VectorXd& t) {
    GradientSample g = prob.energy_and_gradient(theta_of(t));
    g.value -= cfg.e_max;
    g.gradient *= 0.5;
    return g;
  });
  auto g_exact = [&](const Eigen::VectorXd& t) {
    return prob.energy_at(theta_of(t)) - cfg.e_max;
  };
  auto g_counted = [&](const Eigen::VectorXd& t) {
    ++training_evals;
    return g_exact(t);
  };

  CovarianceEstimate cov =
      estimate_covariance(g_src, tbox, cfg.covariance_samples,
                          rng::derive(cfg.seed, streams::kCovariance));
  rep.covariance_evals = cfg.covariance_samples;
  ActiveSubspace as = decompose(cov, 1);
  rep.eigenvalues = as.eigenvalues;
  rep.spectrum_ratio = as.eigenvalues[0] / as.eigenvalues[1];

  Eigen::MatrixXd y_tr(cfg.train_points, 1);
  {
    std::uint64_t tseed = rng::derive(cfg.seed, streams::kTraining);
    for (int k = 0; k < cfg.train_points; ++k) {
      rng::Rng r(rng::derive(tseed, static_cast<std::uint64_t>(k)));
      y_tr.row(k) = as.project(tbox.sample(r)).transpose();
    }
  }
  SignedDistanceTable table =
      build_table(as, tbox, g_counted, y_tr, cfg.inactive_samples,
                  rng::derive(cfg.seed, streams::kTable));
  rep.training_evals = training_evals;

  TrainingSet training = training_from_table(table);
  rep.constraint_fit = fit_linear(training);
  if (rep.constraint_fit.slope[0] >= 0.0)
    rep.warnings.push_back(
        "constraint fit slope is nonnegative; adding material usually lowers "
        "the energy, check the subspace orientation");
  TablePredictions preds = table_predictions(rep.constraint_fit, table);

  // objective subspace: the volume gradient is constant, so one covariance
  // sample is exact and the linear fit has zero residual
  GradientSource v_src = GradientSource::analytic([&](const Eigen::VectorXd& t) {
    return GradientSample{prob.volume_at(theta_of(t)),
                          (0.5 * prob.volume_gradient()).eval()};
  });
  ActiveSubspace obj_as = decompose(
      estimate_covariance(v_src, tbox, 1, rng::derive(cfg.seed, streams::kObjective)),
      1);
  LinearSurrogate obj_fit;
  {
    Eigen::MatrixXd y_obj(8, 1);
    Eigen::VectorXd f_obj(8);
    std::uint64_t oseed = rng::derive(cfg.seed, streams::kObjective + 100);
    for (int k = 0; k < 8; ++k) {
      rng::Rng r(rng::derive(oseed, static_cast<std::uint64_t>(k)));
      Eigen::VectorXd t = tbox.sample(r);
      y_obj(k, 0) = obj_as.project(t)[0];
      f_obj[k] = prob.volume_at(theta_of(t));
    }
    obj_fit = fit_linear(TrainingSet{y_obj, f_obj});
  }

  if (cfg.run_full_baseline) {
    Domain theta_box = Domain::unit(dim);
    ObjectiveFn v_fn = [&](const Eigen::VectorXd& th) {
      return GradientSample{prob.volume_at(th), prob.volume_gradient()};
    };
    ObjectiveFn e_fn = [&](const Eigen::VectorXd& th) {
      GradientSample g = prob.energy_and_gradient(th);
      g.value -= cfg.e_max;
      return g;
    };
    FullSolution full = solve_full(v_fn, e_fn, theta_box, cfg.full);
    ThermalRow row;
    row.label = "full-size";
    row.theta = full.x;
    row.objective = full.value;
    double e_val = full.constraint_value + cfg.e_max;
    row.violation_pct =
        std::max(0.0, (e_val - cfg.e_max) / cfg.e_max * 100.0);
    if (!full.converged) row.notes.push_back("solver hit the iteration cap");
    rep.rows.push_back(std::move(row));
  }

  // The reduced problems are solved over the design box itself (min-norm in
  // material fraction); the surrogates live on the rescaled coordinates, so
  // their inputs are shifted accordingly.
  Domain theta_box = Domain::unit(dim);
  const Eigen::VectorXd shift_f =
      obj_as.w1.transpose() * Eigen::VectorXd::Ones(dim);
  const Eigen::VectorXd shift_g =
      as.w1.transpose() * Eigen::VectorXd::Ones(dim);

  auto reduced_row = [&](const std::string& label, double beta,
                         int iterations) {
    ThermalRow row;
    row.label = label;
    row.beta = beta;
    row.calibration_iterations = iterations;
    ReducedProblem rp;
    LinearSurrogate biased = rep.constraint_fit.with_bias(beta);
    rp.objective = [obj_fit, shift_f](const Eigen::VectorXd& psi) {
      return obj_fit.predict(2.0 * psi - shift_f);
    };
    rp.u1 = obj_as.w1;
    rp.constraint = [biased, shift_g](const Eigen::VectorXd& psi) {
      return biased.predict(2.0 * psi - shift_g);
    };
    rp.w1 = as.w1;
    rp.domain = theta_box;
    ReducedSolverConfig rcfg;
    rcfg.grid_points = cfg.grid_points;
    try {
      ReducedSolution sol = solve_reduced(rp, rcfg);
      double v_exact = prob.volume_at(sol.x);
      double e_exact = prob.energy_at(sol.x);
      row.theta = sol.x;
      row.objective = v_exact;
      row.violation_pct =
          std::max(0.0, (e_exact - cfg.e_max) / cfg.e_max * 100.0);
    } catch (const ReducedInfeasibleError& e) {
      row.feasible = false;
      row.notes.push_back(e.what());
    }
    rep.rows.push_back(std::move(row));
  };

  reduced_row("asm", 0.0, 0);

  const long evals_before_calibration = training_evals;
  for (int i = cfg.i_min; i <= cfg.i_max; ++i) {
    double tau = 1.0 - std::pow(10.0, -i);
    double delta = std::pow(10.0, -(i + 1));
    try {
      BiasCalibration cal = calibrate_chernoff(
          table, preds, tau, delta, cfg.beta_max, cfg.tail,
          rng::derive(cfg.seed, streams::kCalibration), true);
      for (const auto& w : cal.warnings)
        rep.warnings.push_back("i=" + std::to_string(i) + ": " + w);
      reduced_row("casm-i" + std::to_string(i), cal.beta, cal.iterations);
    } catch (const CalibrationError& e) {
      ThermalRow row;
      row.label = "casm-i" + std::to_string(i);
      row.feasible = false;
      row.notes.push_back(e.what());
      rep.rows.push_back(std::move(row));
    }
  }
  if (training_evals != evals_before_calibration)
    throw NumericError(
        "thermal pipeline: calibration consumed exact-constraint evaluations");

  return rep;
}

nlohmann::json ThermalReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json jr{{"label", r.label},
                      {"feasible", r.feasible},
                      {"calibration_iterations", r.calibration_iterations},
                      {"notes", r.notes}};
    if (r.beta) jr["beta"] = *r.beta;
    if (r.objective) jr["objective_min"] = *r.objective;
    if (r.violation_pct) jr["exact_violation_pct"] = *r.violation_pct;
    rows_json.push_back(std::move(jr));
  }
  return nlohmann::json{{"mesh_n", mesh_n},
                        {"e_max", e_max},
                        {"eigenvalues", io::to_vector(eigenvalues)},
                        {"spectrum_ratio", spectrum_ratio},
                        {"constraint_fit", constraint_fit.to_json()},
                        {"rows", rows_json},
                        {"covariance_evals", covariance_evals},
                        {"training_evals", training_evals},
                        {"warnings", warnings},
                        {"discretization", discretization}};
}

std::string ThermalReport::rows_csv() const {
  std::string out = "problem,beta,objective_min,exact_violation_pct\n";
  for (const auto& r : rows) {
    out += r.label;
    out += ',';
    out += r.beta ? io::format_sci(*r.beta) : "";
    out += ',';
    out += r.objective ? io::format_sci(*r.objective) : "";
    out += ',';
    out += r.violation_pct ? io::format_sci(*r.violation_pct) : "";
    out += '\n';
  }
  return out;
}

}  // namespace casm
