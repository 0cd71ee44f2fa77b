// Command-line front end: subspace spectra, bias calibration, feasibility
// grids and reduced optimization for the built-in demo problems or custom
// polynomial constraints.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 calibration cannot reach the requested target.
#include <CLI11.hpp>

#include <Eigen/Core>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "casm/conservative.hpp"
#include "casm/errors.hpp"
#include "casm/io.hpp"
#include "casm/pipeline.hpp"
#include "casm/problems.hpp"
#include "casm/reduced_optimize.hpp"
#include "casm/thermal_pipeline.hpp"

using namespace casm;
using nlohmann::json;

namespace {

struct RunConfig {
  std::string problem = "toy";  // toy | thermal | custom
  std::string problem_file;
  double tau = 0.95;
  double delta = 0.01;
  double beta_max = 10.0;
  std::string method = "bootstrap";  // bootstrap | chernoff
  std::uint64_t seed = 0;
  int samples_m = 0;  // 0: problem-dependent default
  int samples_n = 10;
  int train_s = 80;
  int draws_k = 0;  // 0: one draw per tabulated pair
  int bootstrap_b = 2000;
  int validation_n = 10000;
  int mesh_n = 16;
  double emax = 1.35;
  int i_min = 3;
  int i_max = 6;
  std::string out_dir = ".";

  json to_json() const {
    return json{{"problem", problem},
                {"problem_file", problem_file},
                {"tau", tau},
                {"delta", delta},
                {"beta_max", beta_max},
                {"method", method},
                {"seed", seed},
                {"samples",
                 {{"M", samples_m},
                  {"N", samples_n},
                  {"s", train_s},
                  {"K", draws_k},
                  {"B", bootstrap_b},
                  {"validation_n", validation_n}}},
                {"mesh_n", mesh_n},
                {"emax", emax},
                {"i_min", i_min},
                {"i_max", i_max},
                {"output_dir", out_dir}};
  }

  void validate() const {
    if (problem != "toy" && problem != "thermal" && problem != "custom")
      throw ConfigError("unknown problem: " + problem);
    if (problem == "custom" && problem_file.empty())
      throw ConfigError("custom problem requires --problem-file");
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("need 0 < tau < 1");
    if (!(delta > 0.0)) throw ConfigError("need delta > 0");
    if (!(beta_max > 0.0)) throw ConfigError("need beta-max > 0");
    if (method != "bootstrap" && method != "chernoff")
      throw ConfigError("unknown method: " + method);
    if (samples_n < 1 || train_s < 1 || bootstrap_b < 1 || validation_n < 1)
      throw ConfigError("sample counts must be >= 1");
    if (mesh_n < 2) throw ConfigError("mesh-n must be >= 2");
  }
};

// CLI flags override config-file values override defaults.
void apply_config_file(const std::string& path, const CLI::App& sub,
                       RunConfig& cfg) {
  json j = io::read_json(path);
  auto set_if_unset = [&](const char* flag, auto& field, const json& node,
                          const char* key) {
    if (node.contains(key) && sub.count(flag) == 0)
      field = node.at(key).get<std::decay_t<decltype(field)>>();
  };
  set_if_unset("--problem", cfg.problem, j, "problem");
  set_if_unset("--problem-file", cfg.problem_file, j, "problem_file");
  set_if_unset("--tau", cfg.tau, j, "tau");
  set_if_unset("--delta", cfg.delta, j, "delta");
  set_if_unset("--beta-max", cfg.beta_max, j, "beta_max");
  set_if_unset("--method", cfg.method, j, "method");
  set_if_unset("--seed", cfg.seed, j, "seed");
  set_if_unset("--mesh-n", cfg.mesh_n, j, "mesh_n");
  set_if_unset("--emax", cfg.emax, j, "emax");
  set_if_unset("--i-min", cfg.i_min, j, "i_min");
  set_if_unset("--i-max", cfg.i_max, j, "i_max");
  set_if_unset("--out", cfg.out_dir, j, "output_dir");
  if (j.contains("samples")) {
    const json& s = j.at("samples");
    set_if_unset("--samples-m", cfg.samples_m, s, "M");
    set_if_unset("--samples-n", cfg.samples_n, s, "N");
    set_if_unset("--train-s", cfg.train_s, s, "s");
    set_if_unset("--draws-k", cfg.draws_k, s, "K");
    set_if_unset("--bootstrap-b", cfg.bootstrap_b, s, "B");
    set_if_unset("--validation-n", cfg.validation_n, s, "validation_n");
  }
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

// One wall-clock line per phase, kept out of the data files so reruns stay
// byte-identical.
class PhaseLog {
 public:
  explicit PhaseLog(std::string path) : path_(std::move(path)) {}
  void note(const std::string& phase, double seconds) {
    lines_ += phase + ": " + std::to_string(seconds) + " s\n";
  }
  ~PhaseLog() {
    if (!lines_.empty()) {
      try {
        io::write_file(path_, lines_);
      } catch (...) {
      }
    }
  }

 private:
  std::string path_;
  std::string lines_;
};

class Stopwatch {
 public:
  double lap() {
    auto now = std::chrono::steady_clock::now();
    double s = std::chrono::duration<double>(now - mark_).count();
    mark_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point mark_ =
      std::chrono::steady_clock::now();
};

int covariance_samples_default(const RunConfig& cfg, int dim) {
  if (cfg.samples_m > 0) return cfg.samples_m;
  // the gradient of the energy constraint is nearly rank one, so the
  // thermal spectrum needs far fewer draws than the generic 100 * D rule
  return cfg.problem == "thermal" ? 512 : 100 * dim;
}

TailBoundConfig tail_config(const RunConfig& cfg) {
  TailBoundConfig t = cfg.problem == "thermal" ? ThermalConfig::default_tail()
                                               : TailBoundConfig{};
  t.bootstrap_resamples = cfg.bootstrap_b;
  t.draws = cfg.draws_k;
  return t;
}

// ---------------------------------------------------------------------------
// problem wiring

struct PolyProblem {
  ProblemSpec spec;
  std::function<double(const Eigen::VectorXd&)> g;
};

PolyProblem load_poly_problem(const RunConfig& cfg) {
  PolyProblem p;
  p.spec = cfg.problem == "toy" ? ProblemSpec::demo2d()
                                : ProblemSpec::from_file(cfg.problem_file);
  Polynomial g = p.spec.constraint;
  p.g = [g](const Eigen::VectorXd& x) { return g.value(x); };
  return p;
}

// Calibrated constraint surrogate plus everything needed for validation;
// shared by calibrate, feasibility and optimize.
struct CalibratedModel {
  ConstraintModel model;                                   // polynomial path
  std::function<double(const Eigen::VectorXd&)> surrogate; // biased mean
  std::function<double(const Eigen::VectorXd&)> surrogate_base;
  BiasCalibration calibration;
  long training_evals = 0;
};

CalibratedModel calibrate_poly(const PolyProblem& p, const RunConfig& cfg) {
  PipelineConfig pc;
  pc.covariance_samples = covariance_samples_default(cfg, p.spec.domain.dim());
  pc.train_points = cfg.train_s;
  pc.inactive_samples = cfg.samples_n;
  pc.noise = NoisePolicy::fit();
  pc.seed = cfg.seed;

  CalibratedModel out;
  out.model = build_constraint_model(p.g, p.spec.constraint.as_gradient_source(),
                                     p.spec.domain, pc);
  out.training_evals = out.model.training_evals;

  TailBoundConfig tail = tail_config(cfg);
  std::uint64_t cal_seed = rng::derive(cfg.seed, streams::kCalibration);
  out.calibration =
      cfg.method == "chernoff"
          ? calibrate_chernoff(out.model.table, out.model.predictions, cfg.tau,
                               cfg.delta, cfg.beta_max, tail, cal_seed,
                               out.model.assumption.holds)
          : calibrate_bootstrap(out.model.table, out.model.predictions, cfg.tau,
                                cfg.delta, cfg.beta_max, tail, cal_seed,
                                out.model.assumption.holds);

  GprSurrogate biased = out.model.surrogate.with_bias(out.calibration.beta);
  GprSurrogate base = out.model.surrogate;
  out.surrogate = [biased](const Eigen::VectorXd& y) { return biased.mean(y); };
  out.surrogate_base = [base](const Eigen::VectorXd& y) { return base.mean(y); };
  return out;
}

json run_report(const RunConfig& cfg, const BiasCalibration& cal,
                const ValidationReport& val,
                std::optional<json> optimum = std::nullopt,
                std::vector<std::string> warnings = {}) {
  json j{{"config", cfg.to_json()},
         {"calibration", cal.to_json()},
         {"conservativeness_observed", val.conservativeness},
         {"ur",
          {{"value", val.ur.value},
           {"feasible_count", val.ur.feasible_count},
           {"violating_count", val.ur.violating_count},
           {"empty_feasible_set", val.ur.empty_feasible_set}}},
         {"validation_evals", val.evals},
         {"warnings", warnings}};
  j["optimum"] = optimum ? *optimum : json(nullptr);
  return j;
}

std::string trace_csv(const BiasCalibration& cal) {
  std::string out = "iteration,beta,estimate\n";
  for (size_t i = 0; i < cal.trace.size(); ++i)
    out += std::to_string(i) + "," + io::format_sci(cal.trace[i].first) + "," +
           io::format_sci(cal.trace[i].second) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_spectrum(const RunConfig& cfg) {
  Stopwatch watch;
  PhaseLog log(out_path(cfg, "timings.log"));
  CovarianceEstimate cov;
  if (cfg.problem == "thermal") {
    TransmissionProblem prob(cfg.mesh_n);
    Domain tbox = Domain::symmetric(prob.design_dim(), 1.0);
    GradientSource src = GradientSource::analytic([&](const Eigen::VectorXd& t) {
      GradientSample g =
          prob.energy_and_gradient(((t.array() + 1.0) * 0.5).matrix());
      g.value -= cfg.emax;
      g.gradient *= 0.5;
      return g;
    });
    cov = estimate_covariance(src, tbox, covariance_samples_default(cfg, prob.design_dim()),
                              rng::derive(cfg.seed, streams::kCovariance));
  } else {
    PolyProblem p = load_poly_problem(cfg);
    cov = estimate_covariance(p.spec.constraint.as_gradient_source(),
                              p.spec.domain,
                              covariance_samples_default(cfg, p.spec.domain.dim()),
                              rng::derive(cfg.seed, streams::kCovariance));
  }
  ActiveSubspace as = decompose(cov, 1);
  variance_captured(as);  // rejects all-zero spectra (constant functions)

  std::string csv = "index,eigenvalue\n";
  for (int i = 0; i < as.eigenvalues.size(); ++i)
    csv += std::to_string(i) + "," + io::format_sci(as.eigenvalues[i]) + "\n";
  io::write_file(out_path(cfg, "eigenvalues.csv"), csv);
  io::write_json(out_path(cfg, "subspace.json"), as.to_json());
  io::write_file(out_path(cfg, "covariance.csv"), cov.to_csv());
  log.note("spectrum", watch.lap());
  return 0;
}

// thermal constraint surrogate path for calibrate/optimize
struct ThermalCalibrated {
  ActiveSubspace subspace;
  SignedDistanceTable table;
  LinearSurrogate fit;  // bias 0
  TablePredictions preds;
  BiasCalibration calibration;
  long training_evals = 0;
};

ThermalCalibrated calibrate_thermal(const RunConfig& cfg,
                                    const TransmissionProblem& prob) {
  const int dim = prob.design_dim();
  Domain tbox = Domain::symmetric(dim, 1.0);
  ThermalCalibrated out;

  GradientSource src = GradientSource::analytic([&](const Eigen::VectorXd& t) {
    GradientSample g =
        prob.energy_and_gradient(((t.array() + 1.0) * 0.5).matrix());
    g.value -= cfg.emax;
    g.gradient *= 0.5;
    return g;
  });
  auto g_exact = [&](const Eigen::VectorXd& t) {
    return prob.energy_at(((t.array() + 1.0) * 0.5).matrix()) - cfg.emax;
  };
  long evals = 0;
  auto counted = [&](const Eigen::VectorXd& t) {
    ++evals;
    return g_exact(t);
  };

  out.subspace = decompose(
      estimate_covariance(src, tbox, covariance_samples_default(cfg, dim),
                          rng::derive(cfg.seed, streams::kCovariance)),
      1);
  Eigen::MatrixXd y_tr(cfg.train_s, 1);
  std::uint64_t tseed = rng::derive(cfg.seed, streams::kTraining);
  for (int k = 0; k < cfg.train_s; ++k) {
    rng::Rng r(rng::derive(tseed, static_cast<std::uint64_t>(k)));
    y_tr.row(k) = out.subspace.project(tbox.sample(r)).transpose();
  }
  out.table = build_table(out.subspace, tbox, counted, y_tr, cfg.samples_n,
                          rng::derive(cfg.seed, streams::kTable));
  out.training_evals = evals;
  out.fit = fit_linear(training_from_table(out.table));
  out.preds = table_predictions(out.fit, out.table);

  TailBoundConfig tail = tail_config(cfg);
  std::uint64_t cal_seed = rng::derive(cfg.seed, streams::kCalibration);
  out.calibration =
      cfg.method == "chernoff"
          ? calibrate_chernoff(out.table, out.preds, cfg.tau, cfg.delta,
                               cfg.beta_max, tail, cal_seed, true)
          : calibrate_bootstrap(out.table, out.preds, cfg.tau, cfg.delta,
                                cfg.beta_max, tail, cal_seed, true);
  return out;
}

int cmd_calibrate(const RunConfig& cfg) {
  Stopwatch watch;
  PhaseLog log(out_path(cfg, "timings.log"));
  BiasCalibration cal;
  ValidationReport val;
  std::vector<std::string> warnings;
  SignedDistanceSample final_sample;

  if (cfg.problem == "thermal") {
    TransmissionProblem prob(cfg.mesh_n);
    ThermalCalibrated tc = calibrate_thermal(cfg, prob);
    cal = tc.calibration;
    Domain tbox = Domain::symmetric(prob.design_dim(), 1.0);
    LinearSurrogate biased = tc.fit.with_bias(cal.beta);
    auto g_exact = [&](const Eigen::VectorXd& t) {
      return prob.energy_at(((t.array() + 1.0) * 0.5).matrix()) - cfg.emax;
    };
    val = validate_model(
        [biased](const Eigen::VectorXd& y) { return biased.predict(y); },
        tc.subspace, tbox, g_exact, cfg.validation_n, cfg.seed);
    final_sample = sample_signed_distance(
        tc.table, tc.preds, cal.beta,
        cfg.draws_k > 0 ? cfg.draws_k : tc.table.size() * tc.table.draws_per_point(),
        rng::derive(cfg.seed, streams::kCalibration + 100));
  } else {
    PolyProblem p = load_poly_problem(cfg);
    CalibratedModel cm = calibrate_poly(p, cfg);
    cal = cm.calibration;
    if (!cm.model.assumption.holds)
      warnings.push_back("kernel row-sum check failed: min row sum " +
                         std::to_string(cm.model.assumption.min_row_sum));
    val = validate_model(cm.surrogate, cm.model.subspace, p.spec.domain, p.g,
                         cfg.validation_n, cfg.seed);
    final_sample = sample_signed_distance(
        cm.model.table, cm.model.predictions, cal.beta,
        cfg.draws_k > 0
            ? cfg.draws_k
            : cm.model.table.size() * cm.model.table.draws_per_point(),
        rng::derive(cfg.seed, streams::kCalibration + 100));
  }

  io::write_json(out_path(cfg, "report.json"),
                 run_report(cfg, cal, val, std::nullopt, warnings));
  io::write_file(out_path(cfg, "trace.csv"), trace_csv(cal));
  std::string samples = "index,value\n";
  for (int i = 0; i < final_sample.values.size(); ++i)
    samples += std::to_string(i) + "," +
               io::format_sci(final_sample.values[i]) + "\n";
  io::write_file(out_path(cfg, "samples.csv"), samples);
  log.note("calibrate", watch.lap());
  return 0;
}

int cmd_feasibility(const RunConfig& cfg) {
  Stopwatch watch;
  PhaseLog log(out_path(cfg, "timings.log"));
  if (cfg.problem == "thermal")
    throw ConfigError(
        "feasibility grids are only available for two-dimensional problems");
  PolyProblem p = load_poly_problem(cfg);
  if (p.spec.domain.dim() != 2)
    throw ConfigError("feasibility grids need a two-dimensional domain");

  CalibratedModel cm = calibrate_poly(p, cfg);
  ValidationReport val = validate_model(cm.surrogate, cm.model.subspace,
                                        p.spec.domain, p.g, cfg.validation_n,
                                        cfg.seed);

  const int grid = 201;
  std::string csv = "x1,x2,g_exact,g_surrogate_beta0,g_surrogate_beta\n";
  const Domain& dom = p.spec.domain;
  for (int i = 0; i < grid; ++i) {
    double x1 =
        dom.lower[0] + (dom.upper[0] - dom.lower[0]) * i / (grid - 1);
    for (int j = 0; j < grid; ++j) {
      double x2 =
          dom.lower[1] + (dom.upper[1] - dom.lower[1]) * j / (grid - 1);
      Eigen::Vector2d x(x1, x2);
      Eigen::VectorXd y = cm.model.subspace.project(x);
      csv += io::format_sci(x1) + "," + io::format_sci(x2) + "," +
             io::format_sci(p.g(x)) + "," +
             io::format_sci(cm.surrogate_base(y)) + "," +
             io::format_sci(cm.surrogate(y)) + "\n";
    }
  }
  io::write_file(out_path(cfg, "grid.csv"), csv);
  io::write_json(out_path(cfg, "report.json"),
                 run_report(cfg, cm.calibration, val));
  log.note("feasibility", watch.lap());
  return 0;
}

int cmd_optimize(const RunConfig& cfg) {
  Stopwatch watch;
  PhaseLog log(out_path(cfg, "timings.log"));
  if (cfg.problem == "thermal") {
    ThermalConfig tc;
    tc.mesh_n = cfg.mesh_n;
    tc.e_max = cfg.emax;
    tc.covariance_samples = covariance_samples_default(cfg, 2 * cfg.mesh_n * cfg.mesh_n);
    tc.train_points = cfg.train_s;
    tc.inactive_samples = cfg.samples_n;
    tc.i_min = cfg.i_min;
    tc.i_max = cfg.i_max;
    tc.beta_max = cfg.beta_max;
    tc.tail = tail_config(cfg);
    tc.seed = cfg.seed;
    ThermalReport rep = run_thermal_pipeline(tc);
    io::write_file(out_path(cfg, "table2.csv"), rep.rows_csv());
    io::write_json(out_path(cfg, "report.json"), rep.to_json());
    io::write_file(out_path(cfg, "mesh.csv"), build_mesh(cfg.mesh_n).to_csv());
    for (const auto& row : rep.rows)
      if (row.theta.size() > 0) {
        DesignField field = DesignField::clamped(row.theta);
        io::write_file(out_path(cfg, "theta_" + row.label + ".csv"),
                       field.to_csv());
        io::write_file(out_path(cfg, "theta_" + row.label + ".txt"),
                       field.to_grid_text(cfg.mesh_n));
      }
    log.note("optimize", watch.lap());
    return 0;
  }

  PolyProblem p = load_poly_problem(cfg);
  if (!p.spec.objective)
    throw ConfigError("optimize needs an objective in the problem spec");
  Polynomial obj = *p.spec.objective;
  auto obj_value = [obj](const Eigen::VectorXd& x) { return obj.value(x); };

  CalibratedModel cm = calibrate_poly(p, cfg);
  ValidationReport val = validate_model(cm.surrogate, cm.model.subspace,
                                        p.spec.domain, p.g, cfg.validation_n,
                                        cfg.seed);

  // objective subspace and linear reduced model
  ActiveSubspace obj_as = decompose(
      estimate_covariance(obj.as_gradient_source(), p.spec.domain,
                          covariance_samples_default(cfg, p.spec.domain.dim()),
                          rng::derive(cfg.seed, streams::kObjective)),
      1);
  LinearSurrogate obj_fit;
  {
    const int samples = std::max(8, p.spec.domain.dim() + 2);
    Eigen::MatrixXd y_obj(samples, 1);
    Eigen::VectorXd f_obj(samples);
    std::uint64_t oseed = rng::derive(cfg.seed, streams::kObjective + 100);
    for (int k = 0; k < samples; ++k) {
      rng::Rng r(rng::derive(oseed, static_cast<std::uint64_t>(k)));
      Eigen::VectorXd x = p.spec.domain.sample(r);
      y_obj(k, 0) = obj_as.project(x)[0];
      f_obj[k] = obj_value(x);
    }
    obj_fit = fit_linear(TrainingSet{y_obj, f_obj});
  }

  // violation scale: percent of the constraint magnitude at the box center
  double center_scale = std::max(
      1e-12, std::abs(p.g(0.5 * (p.spec.domain.lower + p.spec.domain.upper))));
  auto violation_pct = [&](const Eigen::VectorXd& x) {
    return 100.0 * std::max(0.0, p.g(x)) / center_scale;
  };

  std::string csv = "problem,beta,objective_min,exact_violation_pct\n";
  json rows = json::array();

  {  // full-space baseline
    Polynomial gpoly = p.spec.constraint;
    ObjectiveFn obj_fn = [obj](const Eigen::VectorXd& x) {
      return GradientSample{obj.value(x), obj.gradient(x)};
    };
    ObjectiveFn con_fn = [gpoly](const Eigen::VectorXd& x) {
      return GradientSample{gpoly.value(x), gpoly.gradient(x)};
    };
    FullSolution full = solve_full(obj_fn, con_fn, p.spec.domain);
    csv += "full-size,," + io::format_sci(full.value) + "," +
           io::format_sci(violation_pct(full.x)) + "\n";
    rows.push_back({{"label", "full-size"},
                    {"objective_min", full.value},
                    {"exact_violation_pct", violation_pct(full.x)},
                    {"converged", full.converged}});
  }

  auto reduced_row = [&](const std::string& label, double beta) {
    ReducedProblem rp;
    GprSurrogate biased = cm.model.surrogate.with_bias(beta);
    rp.objective = [obj_fit](const Eigen::VectorXd& y) {
      return obj_fit.predict(y);
    };
    rp.u1 = obj_as.w1;
    rp.constraint = [biased](const Eigen::VectorXd& y) {
      return biased.mean(y);
    };
    rp.w1 = cm.model.subspace.w1;
    rp.domain = p.spec.domain;
    try {
      ReducedSolution sol = solve_reduced(rp);
      double exact_obj = obj_value(sol.x);
      csv += label + "," + io::format_sci(beta) + "," +
             io::format_sci(exact_obj) + "," +
             io::format_sci(violation_pct(sol.x)) + "\n";
      json jrow = sol.to_json(p.g(sol.x));
      jrow["label"] = label;
      jrow["beta"] = beta;
      jrow["objective_exact"] = exact_obj;
      jrow["exact_violation_pct"] = violation_pct(sol.x);
      rows.push_back(std::move(jrow));
    } catch (const ReducedInfeasibleError& e) {
      csv += label + "," + io::format_sci(beta) + ",,\n";
      rows.push_back(
          {{"label", label}, {"beta", beta}, {"infeasible", true},
           {"note", e.what()}});
    }
  };
  reduced_row("asm", 0.0);
  reduced_row("casm", cm.calibration.beta);

  io::write_file(out_path(cfg, "table2.csv"), csv);
  json optimum{{"rows", rows}};
  io::write_json(out_path(cfg, "report.json"),
                 run_report(cfg, cm.calibration, val, optimum));
  log.note("optimize", watch.lap());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Conservative low-dimensional surrogate construction and optimization "
      "for expensive constraints"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_file;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "JSON config file");
    sub->add_option("--problem", cfg.problem, "toy | thermal | custom");
    sub->add_option("--problem-file", cfg.problem_file,
                    "JSON spec for a custom polynomial problem");
    sub->add_option("--tau", cfg.tau, "target conservativeness probability");
    sub->add_option("--delta", cfg.delta, "bisection stopping tolerance");
    sub->add_option("--beta-max", cfg.beta_max, "bias upper bracket");
    sub->add_option("--method", cfg.method, "chernoff | bootstrap");
    sub->add_option("--seed", cfg.seed, "master seed");
    sub->add_option("--samples-m", cfg.samples_m,
                    "covariance gradient samples (0: auto)");
    sub->add_option("--samples-n", cfg.samples_n,
                    "conditional draws per training point");
    sub->add_option("--train-s", cfg.train_s, "training points");
    sub->add_option("--draws-k", cfg.draws_k,
                    "signed-distance draws per iteration (0: table size)");
    sub->add_option("--bootstrap-b", cfg.bootstrap_b, "bootstrap resamples");
    sub->add_option("--validation-n", cfg.validation_n,
                    "fresh validation points");
    sub->add_option("--mesh-n", cfg.mesh_n, "thermal mesh subdivisions");
    sub->add_option("--emax", cfg.emax, "thermal energy threshold");
    sub->add_option("--i-min", cfg.i_min, "thermal tau ladder start");
    sub->add_option("--i-max", cfg.i_max, "thermal tau ladder end");
    sub->add_option("--out", cfg.out_dir, "output directory");
    return sub;
  };

  CLI::App* spectrum =
      add_common(app.add_subcommand("spectrum", "gradient covariance spectrum"));
  CLI::App* calibrate = add_common(
      app.add_subcommand("calibrate", "calibrate the conservative bias"));
  CLI::App* feasibility = add_common(app.add_subcommand(
      "feasibility", "exact vs surrogate feasible-set grid (2-D problems)"));
  CLI::App* optimize = add_common(
      app.add_subcommand("optimize", "reduced optimization with baselines"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!config_file.empty()) apply_config_file(config_file, *sub, cfg);
    cfg.validate();
    if (sub == spectrum) return cmd_spectrum(cfg);
    if (sub == calibrate) return cmd_calibrate(cfg);
    if (sub == feasibility) return cmd_feasibility(cfg);
    if (sub == optimize) return cmd_optimize(cfg);
    throw ConfigError("unknown subcommand");
  } catch (const CalibrationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
