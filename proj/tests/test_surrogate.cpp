#include "casm/surrogate.hpp"

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <nlohmann/json.hpp>

#include "casm/errors.hpp"
#include "casm/rng.hpp"

using namespace casm;

namespace {

Eigen::VectorXd vec1(double v) {
  Eigen::VectorXd y(1);
  y << v;
  return y;
}

TrainingSet random_training(int s, int d, std::uint64_t seed) {
  rng::Rng r(seed);
  TrainingSet tr;
  tr.y.resize(s, d);
  tr.f.resize(s);
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < d; ++j) tr.y(i, j) = r.uniform(-1.0, 1.0);
    tr.f[i] = std::sin(3.0 * tr.y(i, 0)) + 0.2 * r.normal();
  }
  return tr;
}

}  // namespace

TEST_CASE("kernel basics") {
  KernelConfig cfg{2.0, 0.0};
  CHECK(kernel_eval(cfg, vec1(0.3), vec1(0.3)) == doctest::Approx(1.0));
  CHECK(kernel_eval(cfg, vec1(0.0), vec1(1.0)) ==
        doctest::Approx(std::exp(-2.0)));
  CHECK(kernel_eval(cfg, vec1(0.0), vec1(1.0)) ==
        kernel_eval(cfg, vec1(1.0), vec1(0.0)));
  double prev = 1.0;
  for (double theta : {0.5, 2.0, 8.0, 32.0, 1e2}) {
    double v = kernel_eval({theta, 0.0}, vec1(0.0), vec1(0.7));
    CHECK(v < prev);
    CHECK(v > 0.0);
    prev = v;
  }
}

TEST_CASE("single-point interpolation at zero noise") {
  TrainingSet tr;
  tr.y = Eigen::MatrixXd::Constant(1, 1, 0.2);
  tr.f = Eigen::VectorXd::Constant(1, -1.7);
  GprSurrogate m = GprSurrogate::fit(tr, {1.5, 0.0});
  CHECK(m.mean(vec1(0.2)) == doctest::Approx(-1.7).epsilon(1e-12));
  CHECK(m.variance(vec1(0.2)) == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("zero training values give the zero predictor") {
  TrainingSet tr = random_training(12, 1, 3);
  tr.f.setZero();
  GprSurrogate m = GprSurrogate::fit(tr, {1.0, 1e-4});
  CHECK(m.weights().cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(m.mean(vec1(0.33)) == doctest::Approx(0.0));
}

TEST_CASE("solve residual invariant on a random training set") {
  TrainingSet tr = random_training(20, 2, 17);
  KernelConfig cfg{3.0, 1e-4};
  GprSurrogate m = GprSurrogate::fit(tr, cfg);
  const int s = m.training().size();
  Eigen::MatrixXd a(s, s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j)
      a(i, j) = kernel_eval(cfg, m.training().y.row(i).transpose(),
                            m.training().y.row(j).transpose());
  a.diagonal().array() += cfg.noise_var + m.jitter_applied();
  double fn = m.training().f.norm();
  CHECK((a * m.weights() - m.training().f).norm() <= 1e-8 * std::max(1.0, fn));
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(s);
  CHECK((a * m.ones_weights() - ones).norm() <= 1e-8 * std::sqrt(double(s)));
}

TEST_CASE("bias equals retraining on shifted data") {
  rng::Rng r(99);
  for (int rep = 0; rep < 3; ++rep) {
    TrainingSet tr = random_training(15, 1, 100 + rep);
    KernelConfig cfg{2.0, 1e-3};
    double beta = 0.25 + 0.5 * rep;
    GprSurrogate biased = GprSurrogate::fit(tr, cfg).with_bias(beta);
    TrainingSet shifted = tr;
    shifted.f.array() += beta;
    GprSurrogate retrained = GprSurrogate::fit(shifted, cfg);
    for (int q = 0; q < 50; ++q) {
      Eigen::VectorXd y = vec1(r.uniform(-1.5, 1.5));
      CHECK(std::abs(biased.mean(y) - retrained.mean(y)) <= 1e-10);
    }
  }
}

TEST_CASE("variance is bias-invariant, nonnegative, and decays to the prior") {
  TrainingSet tr = random_training(10, 1, 5);
  GprSurrogate m = GprSurrogate::fit(tr, {1.0, 1e-4});
  GprSurrogate m5 = m.with_bias(5.0);
  rng::Rng r(1);
  for (int q = 0; q < 30; ++q) {
    Eigen::VectorXd y = vec1(r.uniform(-2.0, 2.0));
    CHECK(m.variance(y) == m5.variance(y));
    CHECK(m.variance(y) >= 0.0);
  }
  CHECK(m.variance(vec1(100.0)) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("interpolation invariant at zero noise") {
  // evenly spaced points: zero-noise interpolation is meaningful only while
  // the Gram matrix stays within double-precision conditioning
  TrainingSet tr;
  tr.y.resize(12, 1);
  tr.f.resize(12);
  for (int i = 0; i < 12; ++i) {
    tr.y(i, 0) = -1.0 + 2.0 * i / 11.0;
    tr.f[i] = std::sin(3.0 * tr.y(i, 0));
  }
  GprSurrogate m = GprSurrogate::fit(tr, {2.0, 0.0});
  for (int i = 0; i < m.training().size(); ++i)
    CHECK(std::abs(m.mean(m.training().y.row(i).transpose()) -
                   m.training().f[i]) <= 1e-6);
}

TEST_CASE("row-sum report") {
  SUBCASE("single point") {
    TrainingSet tr;
    tr.y = Eigen::MatrixXd::Constant(1, 1, 0.0);
    tr.f = Eigen::VectorXd::Constant(1, 1.0);
    double nv = 0.5;
    GprSurrogate m = GprSurrogate::fit(tr, {1.0, nv});
    RowSumReport rep = m.check_assumption_rowsums();
    CHECK(rep.holds);
    CHECK(rep.min_row_sum == doctest::Approx(1.0 / (1.0 + nv)));
  }
  SUBCASE("widely separated points behave diagonally") {
    TrainingSet tr;
    tr.y.resize(3, 1);
    tr.y << -100.0, 0.0, 100.0;
    tr.f = Eigen::VectorXd::Ones(3);
    double nv = 0.25;
    GprSurrogate m = GprSurrogate::fit(tr, {1.0, nv});
    RowSumReport rep = m.check_assumption_rowsums();
    CHECK(rep.holds);
    CHECK(rep.min_row_sum == doctest::Approx(1.0 / (1.0 + nv)).epsilon(1e-6));
  }
  SUBCASE("agrees with a direct solve on a tight cluster") {
    TrainingSet tr;
    tr.y.resize(4, 1);
    tr.y << 0.0, 1e-4, 2e-4, 0.5;
    tr.f = Eigen::VectorXd::Ones(4);
    KernelConfig cfg{1.0, 1e-10};
    GprSurrogate m = GprSurrogate::fit(tr, cfg);
    const int s = 4;
    Eigen::MatrixXd a(s, s);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j)
        a(i, j) = kernel_eval(cfg, tr.y.row(i).transpose(),
                              tr.y.row(j).transpose());
    a.diagonal().array() += cfg.noise_var + m.jitter_applied();
    Eigen::VectorXd direct = a.ldlt().solve(Eigen::VectorXd::Ones(s));
    RowSumReport rep = m.check_assumption_rowsums();
    CHECK(rep.min_row_sum ==
          doctest::Approx(direct.minCoeff()).epsilon(1e-4));
    CHECK(rep.holds == (direct.minCoeff() >= 0.0));
  }
}

namespace {

// Draws s training values from the squared-exponential prior with the given
// theta, so the likelihood has an interior optimum near it.
TrainingSet kernel_generated(double theta_true, int s, std::uint64_t seed,
                             double half_width = 1.0) {
  rng::Rng r(seed);
  Eigen::MatrixXd y(s, 1);
  for (int i = 0; i < s; ++i) y(i, 0) = r.uniform(-half_width, half_width);
  Eigen::MatrixXd k(s, s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j)
      k(i, j) = std::exp(-theta_true * std::pow(y(i, 0) - y(j, 0), 2));
  k.diagonal().array() += 1e-8;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  Eigen::VectorXd draws(s);
  for (int i = 0; i < s; ++i) draws[i] = r.normal();
  return {y, Eigen::MatrixXd(llt.matrixL()) * draws};
}

}  // namespace

TEST_CASE("hyperparameter recovery on kernel-generated data") {
  const double theta_true = 2.0;
  TrainingSet tr = kernel_generated(theta_true, 100, 4242);
  HyperparameterFit fit = fit_hyperparameters(tr, NoisePolicy::fixed(1e-6));
  CHECK_FALSE(fit.degenerate);
  CHECK(fit.config.theta >= theta_true / 2.0);
  CHECK(fit.config.theta <= theta_true * 2.0);
}

TEST_CASE("constant training values fall back to theta = 1") {
  TrainingSet tr;
  tr.y.resize(5, 1);
  tr.y << -1.0, -0.5, 0.0, 0.5, 1.0;
  tr.f = Eigen::VectorXd::Constant(5, 3.3);
  HyperparameterFit fit = fit_hyperparameters(tr, NoisePolicy::fixed_default());
  CHECK(fit.degenerate);
  CHECK(fit.config.theta == doctest::Approx(1.0));
}

TEST_CASE("rescaling the inputs rescales theta inversely in the square") {
  TrainingSet tr = kernel_generated(2.0, 60, 55);
  HyperparameterFit base = fit_hyperparameters(tr, NoisePolicy::fixed(1e-6));
  const double c = 3.0;
  TrainingSet scaled = tr;
  scaled.y *= c;
  HyperparameterFit s2 = fit_hyperparameters(scaled, NoisePolicy::fixed(1e-6));
  CHECK(s2.config.theta ==
        doctest::Approx(base.config.theta / (c * c)).epsilon(0.2));
}

TEST_CASE("duplicate training rows are merged by averaging") {
  TrainingSet tr;
  tr.y.resize(3, 1);
  tr.y << 0.5, 0.5, -0.5;
  tr.f.resize(3);
  tr.f << 1.0, 3.0, 0.0;
  TrainingSet merged = TrainingSet::merged(tr.y, tr.f);
  CHECK(merged.size() == 2);
  CHECK(merged.f[0] == doctest::Approx(2.0));
  // zero-noise fit would be singular without the merge
  CHECK_NOTHROW(GprSurrogate::fit(tr, {1.0, 0.0}));
}

TEST_CASE("linear surrogate") {
  SUBCASE("exact fit on linear data") {
    TrainingSet tr;
    tr.y.resize(4, 2);
    tr.y << 0, 0, 1, 0, 0, 1, 1, 1;
    tr.f.resize(4);
    Eigen::Vector2d slope(2.0, -1.0);
    for (int i = 0; i < 4; ++i)
      tr.f[i] = slope.dot(tr.y.row(i).transpose()) + 0.7;
    LinearSurrogate m = fit_linear(tr);
    for (int i = 0; i < 4; ++i)
      CHECK(std::abs(m.predict(tr.y.row(i).transpose()) - tr.f[i]) <= 1e-10);
    SUBCASE("bias shifts predictions additively") {
      LinearSurrogate biased = m.with_bias(0.1);
      Eigen::VectorXd q(2);
      q << 0.3, 0.6;
      CHECK(biased.predict(q) == doctest::Approx(m.predict(q) + 0.1));
    }
  }
  SUBCASE("rank-deficient design errors") {
    TrainingSet tr;
    tr.y.resize(3, 2);
    tr.y << 0, 0, 1, 1, 2, 2;  // collinear
    tr.f.resize(3);
    tr.f << 0.0, 1.0, 2.0;
    CHECK_THROWS_AS(fit_linear(tr), NumericError);
  }
  SUBCASE("too few points errors") {
    TrainingSet tr;
    tr.y.resize(2, 2);
    tr.y << 0, 0, 1, 1;
    tr.f.resize(2);
    tr.f << 0.0, 1.0;
    CHECK_THROWS_AS(fit_linear(tr), ConfigError);
  }
}

TEST_CASE("gpr serialization reloads to identical predictions") {
  TrainingSet tr = random_training(14, 1, 12);
  GprSurrogate m =
      GprSurrogate::fit(tr, {1.7, 1e-4}).with_bias(0.4);
  GprSurrogate back = GprSurrogate::from_json(m.to_json());
  rng::Rng r(3);
  for (int q = 0; q < 25; ++q) {
    Eigen::VectorXd y = vec1(r.uniform(-1.5, 1.5));
    CHECK(back.mean(y) == doctest::Approx(m.mean(y)).epsilon(1e-12));
    CHECK(back.variance(y) == doctest::Approx(m.variance(y)).epsilon(1e-12));
  }
  LinearSurrogate lin{Eigen::VectorXd::Ones(2), -0.5, 0.2};
  LinearSurrogate lin_back = LinearSurrogate::from_json(lin.to_json());
  Eigen::VectorXd q(2);
  q << 0.1, 0.9;
  CHECK(lin_back.predict(q) == lin.predict(q));
}
