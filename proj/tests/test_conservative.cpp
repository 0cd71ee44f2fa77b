#include "casm/conservative.hpp"

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <nlohmann/json.hpp>

#include "casm/errors.hpp"
#include "casm/pipeline.hpp"
#include "casm/problems.hpp"
#include "casm/reduced_optimize.hpp"

using namespace casm;

namespace {

struct ToyModel {
  ProblemSpec spec = ProblemSpec::demo2d();
  ConstraintModel model;
  long* eval_count;  // owned by the closure below

  std::function<double(const Eigen::VectorXd&)> exact() const {
    Polynomial g = spec.constraint;
    return [g](const Eigen::VectorXd& x) { return g.value(x); };
  }
};

ToyModel build_toy(std::uint64_t seed, int s = 40, int n = 10) {
  ToyModel t;
  auto count = std::make_shared<long>(0);
  Polynomial g = t.spec.constraint;
  auto f = [count, g](const Eigen::VectorXd& x) {
    ++*count;
    return g.value(x);
  };
  PipelineConfig cfg;
  cfg.covariance_samples = 1000;
  cfg.train_points = s;
  cfg.inactive_samples = n;
  cfg.seed = seed;
  cfg.noise = NoisePolicy::fit();
  t.model = build_constraint_model(f, t.spec.constraint.as_gradient_source(),
                                   t.spec.domain, cfg);
  static long leaked;  // test-only: keep the counter alive per model
  leaked = *count;
  t.eval_count = &leaked;
  return t;
}

SignedDistanceSample make_sample(std::initializer_list<double> vals) {
  SignedDistanceSample s;
  s.values = Eigen::Map<const Eigen::VectorXd>(std::data(vals),
                                               static_cast<long>(vals.size()));
  return s;
}

}  // namespace

TEST_CASE("table reuses exactly the s * n training evaluations") {
  ToyModel t = build_toy(11, 25, 8);
  CHECK(t.model.training_evals == 25 * 8);
  CHECK(*t.eval_count == 25 * 8);
  CHECK(t.model.table.size() == 25);
  CHECK(t.model.table.draws_per_point() == 8);
  // training values are the row means of the table
  for (int k = 0; k < 25; ++k)
    CHECK(t.model.training.f[k] ==
          doctest::Approx(t.model.table.f.row(k).mean()).epsilon(1e-14));

  // calibration must not touch the exact constraint
  long before = *t.eval_count;
  TailBoundConfig tail;
  calibrate_bootstrap(t.model.table, t.model.predictions, 0.9, 0.01, 10.0,
                      tail, 5, t.model.assumption.holds);
  CHECK(*t.eval_count == before);
}

TEST_CASE("single-draw table collapses to one column") {
  ToyModel t = build_toy(3, 10, 1);
  CHECK(t.model.table.draws_per_point() == 1);
  CHECK(t.model.training.f[2] == doctest::Approx(t.model.table.f(2, 0)));
}

TEST_CASE("constant constraint: signed distances reduce to the bias term") {
  CovarianceEstimate c;
  c.matrix = Eigen::Vector2d(2.0, 1.0).asDiagonal();
  c.sample_count = 1;
  ActiveSubspace as = decompose(c, 1);
  Domain dom = Domain::symmetric(2);
  auto constant = [](const Eigen::VectorXd&) { return 4.2; };
  Eigen::MatrixXd y_tr(3, 1);
  y_tr << -0.8, 0.0, 0.8;
  SignedDistanceTable table = build_table(as, dom, constant, y_tr, 3, 1);
  GprSurrogate m = GprSurrogate::fit(training_from_table(table), {4.0, 0.0});
  REQUIRE(m.check_assumption_rowsums().holds);
  TablePredictions preds = table_predictions(m, table);
  const double beta = 0.7;
  SignedDistanceSample s = sample_signed_distance(table, preds, beta, 300, 2);
  CHECK(s.values.minCoeff() >= -1e-9);
  // every draw is beta times a kernel weight at one of the rows
  for (int j = 0; j < 20; ++j) {
    double v = s.values[j];
    bool matches = false;
    for (int k = 0; k < table.size(); ++k)
      if (std::abs(v - beta * preds.bias_weight[k]) <= 1e-8) matches = true;
    CHECK(matches);
  }
}

TEST_CASE("signed-distance sampling: large bias is always conservative") {
  ToyModel t = build_toy(7);
  double spread = t.model.table.f.maxCoeff() - t.model.table.f.minCoeff();
  double wmin = t.model.predictions.bias_weight.minCoeff();
  REQUIRE(wmin > 0.0);
  double beta = (spread + 1.0) / wmin;
  SignedDistanceSample s =
      sample_signed_distance(t.model.table, t.model.predictions, beta, 500, 1);
  CHECK(s.values.minCoeff() > 0.0);
}

TEST_CASE("signed-distance sampling: perfect interpolant of a flat function") {
  // f varies only along the active direction and the table is noiseless, so
  // a zero-noise fit reproduces every tabulated value
  ProblemSpec toy = ProblemSpec::demo2d();
  ActiveSubspace as = decompose(
      estimate_covariance(toy.constraint.as_gradient_source(), toy.domain, 500, 5),
      1);
  auto flat = [&](const Eigen::VectorXd& x) {
    double y = as.project(x)[0];
    return 2.0 * y + 1.0;
  };
  Eigen::MatrixXd y_tr(6, 1);
  y_tr << -0.9, -0.5, -0.1, 0.3, 0.7, 1.0;
  SignedDistanceTable table = build_table(as, toy.domain, flat, y_tr, 4, 9);
  GprSurrogate m = GprSurrogate::fit(training_from_table(table), {1.0, 0.0});
  SignedDistanceSample s =
      sample_signed_distance(table, table_predictions(m, table), 0.0, 200, 3);
  CHECK(s.values.cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("base conservativeness of the demo constraint sits in the 0.4-0.5 band") {
  ToyModel t = build_toy(17);
  SignedDistanceSample s = sample_signed_distance(
      t.model.table, t.model.predictions, 0.0, 2000, 123);
  double frac =
      static_cast<double>((s.values.array() > 0.0).count()) / s.values.size();
  CHECK(frac >= 0.35);
  CHECK(frac <= 0.60);
}

TEST_CASE("bootstrap mean") {
  SUBCASE("constant sample is exact") {
    SignedDistanceSample s = make_sample({2.5, 2.5, 2.5, 2.5});
    CHECK(bootstrap_mean(s, 500, 1) == doctest::Approx(2.5).epsilon(1e-14));
  }
  SUBCASE("balanced signs average out") {
    SignedDistanceSample s;
    s.values.resize(1000);
    for (int i = 0; i < 1000; ++i) s.values[i] = (i % 2) ? 1.0 : -1.0;
    double m = bootstrap_mean(s, 400, 7);
    CHECK(std::abs(m) <= 3.0 / std::sqrt(1000.0));
  }
  SUBCASE("agrees with the plain mean") {
    ToyModel t = build_toy(23);
    SignedDistanceSample s = sample_signed_distance(
        t.model.table, t.model.predictions, 0.3, 400, 77);
    double plain = s.values.mean();
    double sd = std::sqrt((s.values.array() - plain).square().sum() /
                          (s.values.size() - 1));
    CHECK(std::abs(bootstrap_mean(s, 2000, 5) - plain) <=
          3.0 * sd / std::sqrt(400.0));
  }
}

TEST_CASE("chernoff bound") {
  TailBoundConfig cfg;
  SUBCASE("all margins inside eps drive the bound to zero") {
    SignedDistanceSample s = make_sample({0.1, 0.2, 0.3, 0.15});
    CHECK(chernoff_bound(s, 2.0, 0.2, cfg) < 1e-6);
  }
  SUBCASE("an outlier keeps the bound positive, clamp keeps it below one") {
    SignedDistanceSample s = make_sample({0.0, 0.0, 5.0});
    double chi = chernoff_bound(s, 1.0, 0.0, cfg);
    CHECK(chi > 0.0);
    CHECK(chi <= 1.0);
  }
  SUBCASE("nonincreasing in eps") {
    ToyModel t = build_toy(31);
    SignedDistanceSample s = sample_signed_distance(
        t.model.table, t.model.predictions, 0.2, 300, 9);
    double prev = 2.0;
    for (int i = 1; i <= 20; ++i) {
      double eps = 0.05 * i;
      double chi = chernoff_bound(s, eps, s.values.mean(), cfg);
      CHECK(chi <= prev + 1e-12);
      CHECK(chi >= 0.0);
      CHECK(chi <= 1.0);
      prev = chi;
    }
  }
  SUBCASE("eps must be positive") {
    SignedDistanceSample s = make_sample({1.0});
    CHECK_THROWS_AS(chernoff_bound(s, 0.0, 0.0, cfg), ConfigError);
  }
}

TEST_CASE("bootstrap conservativeness estimator") {
  SUBCASE("all positive") {
    SignedDistanceSample s = make_sample({0.1, 2.0, 0.4});
    CHECK(bootstrap_conservativeness(s, 200, 3) == doctest::Approx(1.0));
  }
  SUBCASE("all negative") {
    SignedDistanceSample s = make_sample({-0.1, -2.0, -0.4});
    CHECK(bootstrap_conservativeness(s, 200, 3) == doctest::Approx(0.0));
  }
  SUBCASE("independent signs at p = 0.7") {
    SignedDistanceSample s;
    s.values.resize(1000);
    rng::Rng r(99);
    for (int i = 0; i < 1000; ++i)
      s.values[i] = r.uniform01() < 0.7 ? 1.0 : -1.0;
    double est = bootstrap_conservativeness(s, 1000, 5);
    CHECK(std::abs(est - 0.7) <= 3.0 * std::sqrt(0.21 / 1000.0) + 0.02);
  }
}

TEST_CASE("bootstrap calibration hits the target on the demo constraint") {
  ToyModel t = build_toy(41);
  TailBoundConfig tail;
  BiasCalibration cal =
      calibrate_bootstrap(t.model.table, t.model.predictions, 0.95, 0.01,
                          10.0, tail, 4, t.model.assumption.holds);
  CHECK(cal.method == CalibrationMethod::Bootstrap);
  CHECK(std::abs(cal.achieved_probability - 0.95) <= 0.01);
  CHECK(cal.iterations == static_cast<int>(cal.trace.size()));
  CHECK(cal.beta > 0.0);
  CHECK(cal.beta < 10.0);

  SUBCASE("deterministic trace") {
    BiasCalibration again =
        calibrate_bootstrap(t.model.table, t.model.predictions, 0.95, 0.01,
                            10.0, tail, 4, t.model.assumption.holds);
    REQUIRE(again.trace.size() == cal.trace.size());
    for (size_t i = 0; i < cal.trace.size(); ++i) {
      CHECK(again.trace[i].first == cal.trace[i].first);
      CHECK(again.trace[i].second == cal.trace[i].second);
    }
  }
}

TEST_CASE("bootstrap calibration rejects targets below the base level") {
  ToyModel t = build_toy(43);
  TailBoundConfig tail;
  CHECK_THROWS_WITH_AS(
      calibrate_bootstrap(t.model.table, t.model.predictions, 0.25, 0.01, 10.0,
                          tail, 4, t.model.assumption.holds),
      doctest::Contains("base conservativeness"), CalibrationError);
}

TEST_CASE("chernoff calibration overshoots the bootstrap bias at equal tau") {
  ToyModel t = build_toy(31);
  TailBoundConfig tail;
  for (double tau : {0.5, 0.95}) {
    BiasCalibration chern =
        calibrate_chernoff(t.model.table, t.model.predictions, tau, 0.01, 10.0,
                           tail, 8, t.model.assumption.holds);
    BiasCalibration boot =
        calibrate_bootstrap(t.model.table, t.model.predictions, tau, 0.01,
                            10.0, tail, 8, t.model.assumption.holds);
    CHECK(chern.beta >= boot.beta);
  }
}

TEST_CASE("chernoff calibration works below the bootstrap base level") {
  ToyModel t = build_toy(53);
  TailBoundConfig tail;
  BiasCalibration cal =
      calibrate_chernoff(t.model.table, t.model.predictions, 0.25, 0.01, 10.0,
                         tail, 6, t.model.assumption.holds);
  CHECK(std::abs(cal.achieved_probability - 0.25) <= 0.01);
}

TEST_CASE("calibration detects an undersized bias bracket") {
  ToyModel t = build_toy(59);
  TailBoundConfig tail;
  CHECK_THROWS_WITH_AS(
      calibrate_bootstrap(t.model.table, t.model.predictions, 0.95, 0.001,
                          1e-7, tail, 4, t.model.assumption.holds),
      doctest::Contains("too small"), CalibrationError);
}

TEST_CASE("empirical conservativeness saturates at large bias") {
  ToyModel t = build_toy(61);
  const GprSurrogate& base = t.model.surrogate;
  auto exact = t.exact();

  // explicit sufficiency threshold from the validation sample
  rng::Rng r(5);
  double fmax = -1e300, mu_min = 1e300, wmin = 1e300;
  for (int i = 0; i < 500; ++i) {
    Eigen::VectorXd x = t.spec.domain.sample(r);
    fmax = std::max(fmax, exact(x));
    Eigen::VectorXd y = t.model.subspace.project(x);
    mu_min = std::min(mu_min, base.mean(y));
    Eigen::VectorXd kv = base.kernel_vector(y);
    wmin = std::min(wmin, kv.dot(base.ones_weights()));
  }
  REQUIRE(wmin > 0.0);
  double beta_sat = (fmax - mu_min) / wmin + 1e-6;
  GprSurrogate saturated = base.with_bias(beta_sat);
  double cons = empirical_conservativeness(
      [&](const Eigen::VectorXd& y) { return saturated.mean(y); },
      t.model.subspace, t.spec.domain, exact, 500, 5);
  CHECK(cons == doctest::Approx(1.0));
}

TEST_CASE("a surrogate that majorizes its own mean is fully conservative") {
  // well-separated training points keep every solve weight positive, so the
  // row-sum condition holds and any positive bias dominates the base mean
  CovarianceEstimate c;
  c.matrix = Eigen::Vector2d(2.0, 1.0).asDiagonal();
  c.sample_count = 1;
  ActiveSubspace as = decompose(c, 1);
  Domain dom = Domain::symmetric(2);
  TrainingSet tr;
  tr.y.resize(3, 1);
  tr.y << -0.8, 0.0, 0.8;
  tr.f.resize(3);
  tr.f << 1.0, -2.0, 0.5;
  GprSurrogate base = GprSurrogate::fit(tr, {4.0, 0.25});
  REQUIRE(base.check_assumption_rowsums().holds);

  // take the unbiased mean itself as the exact function
  auto f = [&](const Eigen::VectorXd& x) { return base.mean(as.project(x)); };
  GprSurrogate biased = base.with_bias(0.5);
  double cons = empirical_conservativeness(
      [&](const Eigen::VectorXd& y) { return biased.mean(y); }, as, dom, f,
      400, 21);
  CHECK(cons == doctest::Approx(1.0));
}

TEST_CASE("unfeasibility ratio flags an empty surrogate-feasible set") {
  ToyModel t = build_toy(71);
  auto always_positive = [](const Eigen::VectorXd&) { return 1.0; };
  UnfeasibilityRatio ur = unfeasibility_ratio(
      always_positive, t.model.subspace, t.spec.domain, t.exact(), 200, 3);
  CHECK(ur.empty_feasible_set);
  CHECK(ur.feasible_count == 0);
}

TEST_CASE("bias lower bound from the expectation argument reaches eps") {
  ToyModel t = build_toy(73);
  const auto& preds = t.model.predictions;
  Eigen::VectorXd row_means = t.model.table.f.rowwise().mean();
  double gap_mean = (preds.base - row_means).mean();
  double w_mean = preds.bias_weight.mean();
  REQUIRE(w_mean > 0.0);
  for (double eps : {0.01, 0.1}) {
    double beta = std::max(0.0, (eps - gap_mean) / w_mean);
    SignedDistanceSample s = sample_signed_distance(
        t.model.table, preds, beta, 1000, 17);
    double mean = bootstrap_mean(s, 1000, 19);
    double sd = std::sqrt((s.values.array() - s.values.mean()).square().sum() /
                          (s.values.size() - 1));
    CHECK(mean >= eps - 2.0 * sd / std::sqrt(1000.0));
  }
}

TEST_CASE("a fully conservative surrogate yields exactly feasible pullbacks") {
  // exact function := the unbiased mean of a model whose solve weights stay
  // positive; any positive bias is then conservative everywhere while a
  // feasible region survives
  ToyModel t = build_toy(61);
  const GprSurrogate& base = t.model.surrogate;
  const ActiveSubspace& as = t.model.subspace;
  auto exact = [&](const Eigen::VectorXd& x) {
    return base.mean(as.project(x));
  };
  GprSurrogate biased = base.with_bias(0.3);

  rng::Rng probe(5);
  double wmin = 1e300;
  for (int i = 0; i < 500; ++i) {
    Eigen::VectorXd y = as.project(t.spec.domain.sample(probe));
    wmin = std::min(wmin, base.kernel_vector(y).dot(base.ones_weights()));
  }
  REQUIRE(wmin > 0.0);
  double cons = empirical_conservativeness(
      [&](const Eigen::VectorXd& y) { return biased.mean(y); }, as,
      t.spec.domain, exact, 2000, 5);
  REQUIRE(cons == doctest::Approx(1.0));

  // minimize x1 + x2 under the biased constraint surrogate
  ReducedProblem rp;
  Eigen::MatrixXd u1(2, 1);
  u1 << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  rp.u1 = u1;
  rp.w1 = as.w1;
  rp.objective = [](const Eigen::VectorXd& y) { return std::sqrt(2.0) * y[0]; };
  rp.constraint = [&](const Eigen::VectorXd& y) { return biased.mean(y); };
  rp.domain = t.spec.domain;
  ReducedSolverConfig rcfg;
  rcfg.grid_points = 101;
  ReducedSolution sol = solve_reduced(rp, rcfg);
  CHECK(sol.constraint_value <= 0.0);
  CHECK(exact(sol.x) <= 1e-9);
  CHECK(sol.coupling_value <= rp.coupling_tol);
}

TEST_CASE("tail-bound calibration at tau 0.5 overshoots far above the target") {
  ToyModel t = build_toy(31);
  TailBoundConfig tail;
  BiasCalibration cal =
      calibrate_chernoff(t.model.table, t.model.predictions, 0.5, 0.01, 10.0,
                         tail, 8, t.model.assumption.holds);
  GprSurrogate biased = t.model.surrogate.with_bias(cal.beta);
  double obs = empirical_conservativeness(
      [&](const Eigen::VectorXd& y) { return biased.mean(y); },
      t.model.subspace, t.spec.domain, t.exact(), 4000, 99);
  CHECK(obs >= 0.75);  // the bound undershoots the true probability
}

TEST_CASE("calibration JSON carries the full trace") {
  ToyModel t = build_toy(79);
  TailBoundConfig tail;
  BiasCalibration cal =
      calibrate_bootstrap(t.model.table, t.model.predictions, 0.9, 0.01, 10.0,
                          tail, 2, t.model.assumption.holds);
  nlohmann::json j = cal.to_json();
  CHECK(j.at("method") == "bootstrap");
  CHECK(j.at("trace").size() == cal.trace.size());
  CHECK(j.at("iterations").get<int>() == cal.iterations);
}
