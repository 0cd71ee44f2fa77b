#include "casm/surrogate.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numbers>

#include "casm/errors.hpp"
#include "casm/io.hpp"

namespace casm {

double kernel_eval(const KernelConfig& cfg, const Eigen::VectorXd& y1,
                   const Eigen::VectorXd& y2) {
  if (y1.size() != y2.size())
    throw ConfigError("kernel_eval: mismatched point sizes");
  return std::exp(-cfg.theta * (y1 - y2).squaredNorm());
}

TrainingSet TrainingSet::merged(const Eigen::MatrixXd& y,
                                const Eigen::VectorXd& f) {
  if (y.rows() != f.size() || y.rows() < 1)
    throw ConfigError("training set: need matching y/f with s >= 1");
  const int s = static_cast<int>(y.rows());
  std::vector<int> group(s, -1);
  std::vector<int> rep;  // representative row per group
  for (int i = 0; i < s; ++i) {
    for (size_t g = 0; g < rep.size(); ++g) {
      if ((y.row(i) - y.row(rep[g])).cwiseAbs().maxCoeff() <= 1e-12) {
        group[i] = static_cast<int>(g);
        break;
      }
    }
    if (group[i] < 0) {
      group[i] = static_cast<int>(rep.size());
      rep.push_back(i);
    }
  }
  TrainingSet out;
  out.y.resize(static_cast<Eigen::Index>(rep.size()), y.cols());
  out.f.resize(static_cast<Eigen::Index>(rep.size()));
  for (size_t g = 0; g < rep.size(); ++g) {
    out.y.row(static_cast<Eigen::Index>(g)) = y.row(rep[g]);
    double acc = 0.0;
    int count = 0;
    for (int i = 0; i < s; ++i)
      if (group[i] == static_cast<int>(g)) {
        acc += f[i];
        ++count;
      }
    out.f[static_cast<Eigen::Index>(g)] = acc / count;
  }
  return out;
}

namespace {

Eigen::MatrixXd gram_matrix(const TrainingSet& tr, double theta) {
  const int s = tr.size();
  Eigen::MatrixXd k(s, s);
  for (int i = 0; i < s; ++i) {
    k(i, i) = 1.0;
    for (int j = i + 1; j < s; ++j) {
      double v = std::exp(-theta * (tr.y.row(i) - tr.y.row(j)).squaredNorm());
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

double variance_of(const Eigen::VectorXd& f) {
  if (f.size() < 2) return 0.0;
  double m = f.mean();
  return (f.array() - m).square().sum() / static_cast<double>(f.size() - 1);
}

}  // namespace

namespace {

// Residual in extended precision; refinement against a double-precision
// residual stalls exactly where squared-exponential Gram matrices are worst.
Eigen::VectorXd residual_ld(const Eigen::MatrixXd& a, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& b) {
  const Eigen::Index n = a.rows();
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    long double acc = b[i];
    for (Eigen::Index j = 0; j < n; ++j)
      acc -= static_cast<long double>(a(i, j)) * static_cast<long double>(x[j]);
    r[i] = static_cast<double>(acc);
  }
  return r;
}

// Solve a x = b with iterative refinement; stops at ~1e-10 relative
// residual or when the residual no longer shrinks.
void refined_solve(const Eigen::LLT<Eigen::MatrixXd>& llt,
                   const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                   Eigen::VectorXd& x) {
  x = llt.solve(b);
  const double target = 5e-10 * std::max(1.0, b.norm());
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 30; ++it) {
    Eigen::VectorXd r = residual_ld(a, x, b);
    double rn = r.norm();
    if (rn <= target || rn >= 0.5 * prev) break;
    prev = rn;
    x += llt.solve(r);
  }
}

}  // namespace

GprSurrogate GprSurrogate::fit(const TrainingSet& tr, const KernelConfig& cfg) {
  if (cfg.theta <= 0.0) throw ConfigError("gpr fit: theta must be > 0");
  if (cfg.noise_var < 0.0) throw ConfigError("gpr fit: noise_var must be >= 0");

  GprSurrogate m;
  m.training_ = TrainingSet::merged(tr.y, tr.f);
  m.kernel_ = cfg;
  const Eigen::MatrixXd k = gram_matrix(m.training_, cfg.theta);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(m.training_.size());

  double jitter = 0.0;
  Eigen::MatrixXd a;
  Eigen::LLT<Eigen::MatrixXd> llt;
  for (;;) {
    a = k;
    a.diagonal().array() += cfg.noise_var + jitter;
    llt.compute(a);
    if (llt.info() == Eigen::Success) break;
    double base = k.diagonal().mean();
    jitter = jitter == 0.0 ? 1e-10 * base : 10.0 * jitter;
    if (jitter > 1e-4 * base * 1.0000001)
      throw NumericError(
          "gpr fit: Gram matrix not positive definite even after jitter up "
          "to 1e-4 * mean diagonal; training points may be (near-)duplicates "
          "or the length-scale too large");
  }
  refined_solve(llt, a, m.training_.f, m.weights_);
  refined_solve(llt, a, ones, m.ones_weights_);
  m.chol_lower_ = llt.matrixL();
  m.jitter_ = jitter;
  m.bias_ = 0.0;
  return m;
}

Eigen::VectorXd GprSurrogate::kernel_vector(const Eigen::VectorXd& y) const {
  const int s = training_.size();
  Eigen::VectorXd k(s);
  for (int i = 0; i < s; ++i)
    k[i] = std::exp(-kernel_.theta *
                    (training_.y.row(i).transpose() - y).squaredNorm());
  return k;
}

double GprSurrogate::mean_at_bias(const Eigen::VectorXd& y, double beta) const {
  Eigen::VectorXd k = kernel_vector(y);
  return k.dot(weights_) + beta * k.dot(ones_weights_);
}

double GprSurrogate::variance(const Eigen::VectorXd& y) const {
  Eigen::VectorXd k = kernel_vector(y);
  Eigen::VectorXd half = chol_lower_.triangularView<Eigen::Lower>().solve(k);
  double v = 1.0 - half.squaredNorm();
  return v > 0.0 ? v : 0.0;
}

GprSurrogate GprSurrogate::with_bias(double beta) const {
  if (beta < 0.0) throw ConfigError("gpr bias must be >= 0");
  GprSurrogate out = *this;
  out.bias_ = beta;
  return out;
}

RowSumReport GprSurrogate::check_assumption_rowsums() const {
  RowSumReport r;
  r.min_row_sum = ones_weights_.minCoeff();
  r.holds = r.min_row_sum >= 0.0;
  return r;
}

HyperparameterFit fit_hyperparameters(const TrainingSet& tr_raw,
                                      const NoisePolicy& policy) {
  TrainingSet tr = TrainingSet::merged(tr_raw.y, tr_raw.f);
  if (tr.size() < 3)
    throw ConfigError("fit_hyperparameters: need at least 3 training points");

  const double fvar = variance_of(tr.f);
  auto noise_for = [&](double theta_unused) {
    (void)theta_unused;
    switch (policy.kind) {
      case NoisePolicy::Kind::Fixed:
        return policy.value;
      case NoisePolicy::Kind::FixedDefault:
        return 1e-4 * fvar;
      case NoisePolicy::Kind::Fit:
        return 0.0;  // handled by its own grid below
    }
    return 0.0;
  };

  if (fvar <= 1e-14 * std::max(1.0, tr.f.cwiseAbs().maxCoeff())) {
    HyperparameterFit out;
    out.config = {1.0, noise_for(1.0)};
    out.degenerate = true;
    return out;
  }

  const int s = tr.size();
  auto log_marginal = [&](double theta, double noise_var) {
    Eigen::MatrixXd a = gram_matrix(tr, theta);
    a.diagonal().array() += noise_var;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success)
      return -std::numeric_limits<double>::infinity();
    Eigen::VectorXd alpha = llt.solve(tr.f);
    double log_det_half =
        Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    return -0.5 * tr.f.dot(alpha) - log_det_half -
           0.5 * s * std::log(2.0 * std::numbers::pi);
  };

  const bool fit_noise = policy.kind == NoisePolicy::Kind::Fit;
  const int grid_n = 40;
  auto log_grid = [&](double lo, double hi, int i) {
    double t = static_cast<double>(i) / (grid_n - 1);
    return lo * std::pow(hi / lo, t);
  };

  double best_theta = 1.0;
  double best_noise = fit_noise ? 1e-6 * fvar : noise_for(1.0);
  double best_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_n; ++i) {
    double theta = log_grid(1e-3, 1e3, i);
    if (fit_noise) {
      for (int j = 0; j < grid_n; ++j) {
        double nv = fvar * log_grid(1e-8, 1.0, j);
        double v = log_marginal(theta, nv);
        if (v > best_val) {
          best_val = v;
          best_theta = theta;
          best_noise = nv;
        }
      }
    } else {
      double nv = noise_for(theta);
      double v = log_marginal(theta, nv);
      if (v > best_val) {
        best_val = v;
        best_theta = theta;
        best_noise = nv;
      }
    }
  }

  // golden-section refinement in log(theta) around the best grid point
  auto golden = [&](double lo, double hi, auto&& obj) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = obj(c), fd = obj(d);
    while ((b - a) > 1e-3) {  // relative: bounds are in log space
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - phi * (b - a);
        fc = obj(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + phi * (b - a);
        fd = obj(d);
      }
    }
    return 0.5 * (a + b);
  };

  double step = std::log(1e3 / 1e-3) / (grid_n - 1);
  double lt = std::log(best_theta);
  double refined = golden(lt - step, lt + step, [&](double l) {
    return log_marginal(std::exp(l),
                        fit_noise ? best_noise : noise_for(std::exp(l)));
  });
  best_theta = std::exp(refined);
  if (fit_noise) {
    double ln = std::log(std::max(best_noise, 1e-12 * fvar));
    double nstep = std::log(1e8) / (grid_n - 1);
    double rn = golden(ln - nstep, ln + nstep, [&](double l) {
      return log_marginal(best_theta, std::exp(l));
    });
    best_noise = std::exp(rn);
  } else {
    best_noise = noise_for(best_theta);
  }

  HyperparameterFit out;
  out.config = {best_theta, best_noise};
  return out;
}

LinearSurrogate fit_linear(const TrainingSet& tr_raw) {
  TrainingSet tr = TrainingSet::merged(tr_raw.y, tr_raw.f);
  const int s = tr.size();
  const int d = tr.dim();
  if (s < d + 1)
    throw ConfigError("fit_linear: need at least d+1 training points");
  Eigen::MatrixXd design(s, d + 1);
  design.leftCols(d) = tr.y;
  design.col(d).setOnes();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < d + 1)
    throw NumericError("fit_linear: rank-deficient design matrix");
  Eigen::VectorXd coef = qr.solve(tr.f);
  LinearSurrogate out;
  out.slope = coef.head(d);
  out.intercept = coef[d];
  out.bias = 0.0;
  return out;
}

nlohmann::json GprSurrogate::to_json() const {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < training_.size(); ++i)
    rows.push_back(io::to_vector(training_.y.row(i).transpose()));
  return nlohmann::json{{"theta", kernel_.theta},
                        {"noise_var", kernel_.noise_var},
                        {"bias", bias_},
                        {"y_tr", rows},
                        {"f_tr", io::to_vector(training_.f)}};
}

GprSurrogate GprSurrogate::from_json(const nlohmann::json& j) {
  auto rows = j.at("y_tr").get<std::vector<std::vector<double>>>();
  auto f = j.at("f_tr").get<std::vector<double>>();
  if (rows.empty() || rows.size() != f.size())
    throw ConfigError("gpr json: inconsistent y_tr/f_tr");
  TrainingSet tr;
  tr.y.resize(static_cast<Eigen::Index>(rows.size()),
              static_cast<Eigen::Index>(rows[0].size()));
  for (size_t i = 0; i < rows.size(); ++i)
    tr.y.row(static_cast<Eigen::Index>(i)) =
        io::from_vector(rows[i]).transpose();
  tr.f = io::from_vector(f);
  KernelConfig cfg{j.at("theta").get<double>(), j.at("noise_var").get<double>()};
  return fit(tr, cfg).with_bias(j.at("bias").get<double>());
}

nlohmann::json LinearSurrogate::to_json() const {
  return nlohmann::json{{"slope", io::to_vector(slope)},
                        {"intercept", intercept},
                        {"bias", bias}};
}

LinearSurrogate LinearSurrogate::from_json(const nlohmann::json& j) {
  LinearSurrogate out;
  out.slope = io::from_vector(j.at("slope").get<std::vector<double>>());
  out.intercept = j.at("intercept").get<double>();
  out.bias = j.at("bias").get<double>();
  return out;
}

}  // namespace casm
