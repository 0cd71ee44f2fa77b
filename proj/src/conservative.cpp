#include "casm/conservative.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "casm/errors.hpp"
#include "casm/rng.hpp"

namespace casm {

SignedDistanceTable build_table(
    const ActiveSubspace& as, const Domain& dom,
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::MatrixXd& y_tr, int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("build_table: need n >= 1");
  if (y_tr.rows() < 1) throw ConfigError("build_table: empty training set");
  const int s = static_cast<int>(y_tr.rows());
  SignedDistanceTable table;
  table.y = y_tr;
  table.f.resize(s, n);
  for (int k = 0; k < s; ++k) {
    Eigen::VectorXd y = y_tr.row(k).transpose();
    auto zs = sample_inactive(as, dom, y, n, rng::derive(seed, k));
    for (int i = 0; i < n; ++i) {
      double v = f(as.lift(y, zs[static_cast<size_t>(i)]));
      if (!std::isfinite(v))
        throw NumericError("build_table: non-finite f at row " +
                           std::to_string(k));
      table.f(k, i) = v;
    }
  }
  return table;
}

TrainingSet training_from_table(const SignedDistanceTable& table) {
  TrainingSet tr;
  tr.y = table.y;
  tr.f = table.f.rowwise().mean();
  return tr;
}

TablePredictions table_predictions(const GprSurrogate& m,
                                   const SignedDistanceTable& table) {
  TablePredictions p;
  const int s = table.size();
  p.base.resize(s);
  p.bias_weight.resize(s);
  for (int k = 0; k < s; ++k) {
    Eigen::VectorXd kv = m.kernel_vector(table.y.row(k).transpose());
    p.base[k] = kv.dot(m.weights());
    p.bias_weight[k] = kv.dot(m.ones_weights());
  }
  return p;
}

TablePredictions table_predictions(const LinearSurrogate& m,
                                   const SignedDistanceTable& table) {
  TablePredictions p;
  const int s = table.size();
  p.base.resize(s);
  p.bias_weight = Eigen::VectorXd::Ones(s);
  for (int k = 0; k < s; ++k)
    p.base[k] = m.slope.dot(table.y.row(k).transpose()) + m.intercept;
  return p;
}

SignedDistanceSample sample_signed_distance(const SignedDistanceTable& table,
                                            const TablePredictions& preds,
                                            double beta, int k_draws,
                                            std::uint64_t seed) {
  if (table.size() < 1 || table.draws_per_point() < 1)
    throw ConfigError("sample_signed_distance: empty table");
  if (k_draws < 1) throw ConfigError("sample_signed_distance: need K >= 1");
  SignedDistanceSample out;
  out.values.resize(k_draws);
  out.beta = beta;
  out.seed = seed;
  rng::Rng r(rng::derive(seed, 0));
  for (int j = 0; j < k_draws; ++j) {
    int k = r.uniform_index(table.size());
    int i = r.uniform_index(table.draws_per_point());
    out.values[j] = preds.base[k] + beta * preds.bias_weight[k] - table.f(k, i);
  }
  return out;
}

SignedDistanceSample sample_signed_distance(const SignedDistanceTable& table,
                                            const GprSurrogate& m, int k_draws,
                                            std::uint64_t seed) {
  return sample_signed_distance(table, table_predictions(m, table), m.bias(),
                                k_draws, seed);
}

double bootstrap_mean(const SignedDistanceSample& s, int resamples,
                      std::uint64_t seed) {
  if (resamples < 1) throw ConfigError("bootstrap_mean: need B >= 1");
  const int k = static_cast<int>(s.values.size());
  double acc = 0.0;
  for (int b = 0; b < resamples; ++b) {
    rng::Rng r(rng::derive(seed, b));
    double m = 0.0;
    for (int j = 0; j < k; ++j) m += s.values[r.uniform_index(k)];
    acc += m / k;
  }
  return acc / resamples;
}

double bootstrap_conservativeness(const SignedDistanceSample& s, int resamples,
                                  std::uint64_t seed) {
  if (resamples < 1)
    throw ConfigError("bootstrap_conservativeness: need B >= 1");
  const int k = static_cast<int>(s.values.size());
  double acc = 0.0;
  for (int b = 0; b < resamples; ++b) {
    rng::Rng r(rng::derive(seed, b));
    int positive = 0;
    for (int j = 0; j < k; ++j)
      if (s.values[r.uniform_index(k)] > 0.0) ++positive;
    acc += static_cast<double>(positive) / k;
  }
  return acc / resamples;
}

namespace {

double log_sum_exp(const Eigen::VectorXd& v) {
  double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

double chernoff_bound(const SignedDistanceSample& s, double eps, double center,
                      const TailBoundConfig& cfg) {
  if (!(eps > 0.0)) throw ConfigError("chernoff_bound: eps must be > 0");
  if (cfg.u_grid < 20) throw ConfigError("chernoff_bound: grid count >= 20");
  const double n = static_cast<double>(s.values.size());
  Eigen::VectorXd margins = (s.values.array() - center).abs() - eps;

  // log of the empirical bound at exponent scale u
  auto log_bound = [&](double u) {
    return log_sum_exp(u * margins) - std::log(n);
  };

  double best_u = cfg.u_min;
  double best = log_bound(cfg.u_min);
  for (int i = 1; i < cfg.u_grid; ++i) {
    double t = static_cast<double>(i) / (cfg.u_grid - 1);
    double u = cfg.u_min * std::pow(cfg.u_max / cfg.u_min, t);
    double v = log_bound(u);
    if (v < best) {
      best = v;
      best_u = u;
    }
  }
  // golden-section in log(u) around the best grid point
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double step = std::log(cfg.u_max / cfg.u_min) / (cfg.u_grid - 1);
  double a = std::log(best_u) - step;
  double b = std::log(best_u) + step;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = log_bound(std::exp(c));
  double fd = log_bound(std::exp(d));
  for (int it = 0; it < 60 && (b - a) > 1e-6; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = log_bound(std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = log_bound(std::exp(d));
    }
  }
  best = std::min(best, std::min(fc, fd));
  double chi = std::exp(best);
  return std::clamp(chi, 0.0, 1.0);
}

namespace {

struct BisectionOutcome {
  double estimate = 0.0;
};

// Shared bisection driver for both calibration algorithms. `estimator`
// evaluates the conservativeness estimate for a given bias with a derived
// per-iteration seed; brackets move on the estimate-vs-tau comparison.
BiasCalibration bisect_bias(
    CalibrationMethod method, double tau, double delta, double beta_max,
    int max_iterations, std::uint64_t seed, bool assumption_holds,
    const std::function<double(double beta, std::uint64_t iter_seed)>&
        estimator) {
  if (!(tau > 0.0 && tau < 1.0))
    throw ConfigError("calibrate: need 0 < tau < 1");
  if (!(delta > 0.0)) throw ConfigError("calibrate: need delta > 0");
  if (!(beta_max > 0.0)) throw ConfigError("calibrate: need beta_max > 0");

  BiasCalibration cal;
  cal.method = method;
  if (!assumption_holds)
    cal.warnings.push_back(
        "row-sum assumption violated: bias may not raise the mean everywhere");

  const double beta_span = beta_max;
  double beta_lo = 0.0;
  double beta_hi = beta_max;
  double beta = 0.5 * beta_max;

  auto best_of_trace = [&]() {
    size_t best = 0;
    for (size_t i = 1; i < cal.trace.size(); ++i)
      if (std::abs(cal.trace[i].second - tau) <
          std::abs(cal.trace[best].second - tau))
        best = i;
    cal.beta = cal.trace[best].first;
    cal.achieved_probability = cal.trace[best].second;
  };

  for (int n = 0;; ++n) {
    double est = estimator(beta, rng::derive(seed, static_cast<std::uint64_t>(n)));
    cal.trace.emplace_back(beta, est);
    cal.iterations = n + 1;

    if (std::abs(est - tau) <= delta) {
      cal.beta = beta;
      cal.achieved_probability = est;
      return cal;
    }
    if (est > tau)
      beta_hi = beta;
    else
      beta_lo = beta;

    if (beta_hi - beta_lo < 1e-9 * beta_span) {
      if (beta_hi <= 1e-6 * beta_span && est > tau) {
        best_of_trace();
        throw CalibrationError(
            "calibration infeasible: target tau=" + std::to_string(tau) +
                " is below the base conservativeness at beta=0 (estimate " +
                std::to_string(est) + ")",
            cal);
      }
      if (beta_lo >= (1.0 - 1e-6) * beta_span && est < tau) {
        best_of_trace();
        throw CalibrationError(
            "calibration infeasible: beta_max=" + std::to_string(beta_max) +
                " too small, estimate " + std::to_string(est) +
                " still below tau at the bracket top",
            cal);
      }
      cal.warnings.push_back(
          "bracket collapsed before the delta criterion was met (sampling "
          "noise); returning the closest iterate");
      best_of_trace();
      return cal;
    }
    if (n + 1 >= max_iterations) {
      cal.warnings.push_back("iteration cap reached before convergence");
      best_of_trace();
      return cal;
    }
    beta = 0.5 * (beta_lo + beta_hi);
  }
}

}  // namespace

BiasCalibration calibrate_chernoff(const SignedDistanceTable& table,
                                   const TablePredictions& preds, double tau,
                                   double delta, double beta_max,
                                   const TailBoundConfig& cfg,
                                   std::uint64_t seed, bool assumption_holds) {
  const int k_draws =
      cfg.draws > 0 ? cfg.draws : table.size() * table.draws_per_point();
  auto estimator = [&](double beta, std::uint64_t iter_seed) {
    SignedDistanceSample s =
        sample_signed_distance(table, preds, beta, k_draws, iter_seed);
    double expectation =
        bootstrap_mean(s, cfg.bootstrap_resamples, rng::derive(iter_seed, 1));
    if (expectation <= 0.0) return 0.0;  // bound is vacuous; raise the bias
    double chi = chernoff_bound(s, expectation, expectation, cfg);
    return 1.0 - chi;
  };
  return bisect_bias(CalibrationMethod::Chernoff, tau, delta, beta_max,
                     cfg.max_iterations, seed, assumption_holds, estimator);
}

BiasCalibration calibrate_bootstrap(const SignedDistanceTable& table,
                                    const TablePredictions& preds, double tau,
                                    double delta, double beta_max,
                                    const TailBoundConfig& cfg,
                                    std::uint64_t seed, bool assumption_holds) {
  const int k_draws =
      cfg.draws > 0 ? cfg.draws : table.size() * table.draws_per_point();

  // the sampling estimator cannot reach below the beta=0 level
  SignedDistanceSample base =
      sample_signed_distance(table, preds, 0.0, k_draws, rng::derive(seed, 0xBA5E));
  double base_level = bootstrap_conservativeness(
      base, cfg.bootstrap_resamples, rng::derive(seed, 0xBA5F));
  if (tau <= base_level) {
    BiasCalibration cal;
    cal.method = CalibrationMethod::Bootstrap;
    cal.trace.emplace_back(0.0, base_level);
    cal.iterations = 0;
    cal.beta = 0.0;
    cal.achieved_probability = base_level;
    throw CalibrationError(
        "calibration infeasible: tau=" + std::to_string(tau) +
            " is below the base conservativeness " +
            std::to_string(base_level) + " at beta=0",
        cal);
  }

  auto estimator = [&](double beta, std::uint64_t iter_seed) {
    SignedDistanceSample s =
        sample_signed_distance(table, preds, beta, k_draws, iter_seed);
    return bootstrap_conservativeness(s, cfg.bootstrap_resamples,
                                      rng::derive(iter_seed, 1));
  };
  return bisect_bias(CalibrationMethod::Bootstrap, tau, delta, beta_max,
                     cfg.max_iterations, seed, assumption_holds, estimator);
}

double empirical_conservativeness(
    const std::function<double(const Eigen::VectorXd&)>& surrogate_mean,
    const ActiveSubspace& as, const Domain& dom,
    const std::function<double(const Eigen::VectorXd&)>& f, int n,
    std::uint64_t seed) {
  if (n < 1) throw ConfigError("empirical_conservativeness: need n >= 1");
  long hits = 0;
  for (int j = 0; j < n; ++j) {
    rng::Rng r(rng::derive(seed, static_cast<std::uint64_t>(j)));
    Eigen::VectorXd x = dom.sample(r);
    if (surrogate_mean(as.project(x)) >= f(x)) ++hits;
  }
  return static_cast<double>(hits) / n;
}

UnfeasibilityRatio unfeasibility_ratio(
    const std::function<double(const Eigen::VectorXd&)>& surrogate_mean,
    const ActiveSubspace& as, const Domain& dom,
    const std::function<double(const Eigen::VectorXd&)>& g_exact, int n,
    std::uint64_t seed) {
  if (n < 1) throw ConfigError("unfeasibility_ratio: need n >= 1");
  UnfeasibilityRatio out;
  for (int j = 0; j < n; ++j) {
    rng::Rng r(rng::derive(seed, static_cast<std::uint64_t>(j)));
    Eigen::VectorXd x = dom.sample(r);
    if (surrogate_mean(as.project(x)) <= 0.0) {
      ++out.feasible_count;
      if (g_exact(x) >= 0.0) ++out.violating_count;
    }
  }
  if (out.feasible_count == 0) {
    out.empty_feasible_set = true;
    out.value = 0.0;
  } else {
    out.value =
        static_cast<double>(out.violating_count) / out.feasible_count;
  }
  return out;
}

nlohmann::json BiasCalibration::to_json() const {
  nlohmann::json trace_json = nlohmann::json::array();
  for (const auto& [b, e] : trace) trace_json.push_back({b, e});
  return nlohmann::json{
      {"method", method == CalibrationMethod::Chernoff ? "chernoff" : "bootstrap"},
      {"beta", beta},
      {"achieved_probability", achieved_probability},
      {"iterations", iterations},
      {"trace", trace_json},
      {"warnings", warnings}};
}

}  // namespace casm
