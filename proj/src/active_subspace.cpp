#include "casm/active_subspace.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "casm/errors.hpp"
#include "casm/io.hpp"

namespace casm {

namespace {

// Fixes eigenvector signs so the largest-magnitude entry of each column is
// positive; SVD signs are otherwise arbitrary and would break reproducibility.
void fix_column_signs(Eigen::MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    Eigen::Index idx = 0;
    m.col(j).cwiseAbs().maxCoeff(&idx);
    if (m(idx, j) < 0.0) m.col(j) = -m.col(j);
  }
}

std::string point_to_string(const Eigen::VectorXd& x) {
  std::ostringstream ss;
  ss << "[";
  for (int i = 0; i < x.size(); ++i) {
    if (i) ss << ", ";
    ss << x[i];
  }
  ss << "]";
  return ss.str();
}

}  // namespace

std::string CovarianceEstimate::to_csv() const { return io::matrix_csv(matrix); }

CovarianceEstimate estimate_covariance(const GradientSource& src,
                                       const Domain& dom, int sample_count,
                                       std::uint64_t seed) {
  dom.validate();
  if (sample_count < 1)
    throw ConfigError("estimate_covariance: sample count must be >= 1");

  const int d = dom.dim();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < sample_count; ++i) {
    rng::Rng r(rng::derive(seed, static_cast<std::uint64_t>(i)));
    Eigen::VectorXd x = dom.sample(r);
    GradientSample g = src.eval(x, dom);
    if (!g.gradient.allFinite() || !std::isfinite(g.value))
      throw NumericError("estimate_covariance: non-finite gradient at sample " +
                         std::to_string(i) + " x=" + point_to_string(x));
    acc.selfadjointView<Eigen::Lower>().rankUpdate(g.gradient, 1.0);
  }
  CovarianceEstimate out;
  out.matrix = Eigen::MatrixXd(acc.selfadjointView<Eigen::Lower>()) /
               static_cast<double>(sample_count);
  out.sample_count = sample_count;
  return out;
}

ActiveSubspace decompose(const CovarianceEstimate& cov, int d) {
  const int dim = cov.dim();
  if (d < 1 || d >= dim)
    throw ConfigError("decompose: need 1 <= d < D, got d=" + std::to_string(d) +
                      " D=" + std::to_string(dim));

  // symmetrize before diagonalizing; the estimator is symmetric up to roundoff
  Eigen::MatrixXd sym = 0.5 * (cov.matrix + cov.matrix.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success)
    throw NumericError("decompose: eigendecomposition failed");

  // ascending from Eigen; flip to nonincreasing
  Eigen::VectorXd vals = es.eigenvalues().reverse();
  Eigen::MatrixXd vecs = es.eigenvectors().rowwise().reverse();
  fix_column_signs(vecs);

  ActiveSubspace as;
  as.w1 = vecs.leftCols(d);
  as.w2 = vecs.rightCols(dim - d);
  as.eigenvalues = vals;
  as.d = d;
  double scale = std::max(1.0, std::abs(vals[0]));
  as.degenerate_gap = std::abs(vals[d - 1] - vals[d]) <= 1e-12 * scale;
  return as;
}

double variance_captured(const ActiveSubspace& as) {
  double total = as.eigenvalues.sum();
  if (total <= 0.0)
    throw NumericError(
        "variance_captured: all-zero spectrum (constant function)");
  double head = as.eigenvalues.head(as.d).sum();
  return 100.0 * head / total;
}

namespace {

struct Interval {
  double lo, hi;
};

// Intersection of {t : lower <= base + t * dir <= upper} over all
// coordinates. Coordinates with negligible dir must already be feasible.
Interval feasible_interval(const Eigen::VectorXd& base,
                           const Eigen::VectorXd& dir, const Domain& dom,
                           bool& empty) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  const double tiny = 1e-14;
  empty = false;
  for (int j = 0; j < dom.dim(); ++j) {
    double a = dom.lower[j] - base[j];
    double b = dom.upper[j] - base[j];
    if (std::abs(dir[j]) <= tiny) {
      double span = dom.upper[j] - dom.lower[j];
      if (a > 1e-12 * span || b < -1e-12 * span) empty = true;
      continue;
    }
    double t0 = a / dir[j];
    double t1 = b / dir[j];
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
  }
  if (lo > hi) {
    // tolerate roundoff-degenerate slices (e.g. box corners)
    double span = (dom.upper - dom.lower).maxCoeff();
    if (lo - hi <= 1e-9 * span) {
      double mid = 0.5 * (lo + hi);
      lo = hi = mid;
    } else {
      empty = true;
    }
  }
  return {lo, hi};
}

// Feasible point on {x : W1^T x = y} inside the box, by alternating
// projections between the affine set and the box.
Eigen::VectorXd feasible_slice_point(const ActiveSubspace& as,
                                     const Domain& dom,
                                     const Eigen::VectorXd& y) {
  Eigen::VectorXd x = dom.clamp(as.w1 * y);
  const int max_rounds = 20000;
  const double span = (dom.upper - dom.lower).maxCoeff();
  const double tol = 1e-12 * std::max(1.0, span);
  for (int round = 0; round < max_rounds; ++round) {
    x -= as.w1 * (as.w1.transpose() * x - y);  // onto the affine set
    if (dom.contains(x, tol)) return x;
    x = dom.clamp(x);
  }
  x -= as.w1 * (as.w1.transpose() * x - y);
  double gap = dom.box_distance(x);
  throw NumericError(
      "sample_inactive: empty slice (y outside the projected domain or "
      "alternating projection stalled); y=" +
      point_to_string(y) + " residual box distance=" + std::to_string(gap));
}

}  // namespace

std::vector<Eigen::VectorXd> sample_inactive(const ActiveSubspace& as,
                                             const Domain& dom,
                                             const Eigen::VectorXd& y, int n,
                                             std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample_inactive: need n >= 1");
  if (y.size() != as.d) throw ConfigError("sample_inactive: y has wrong size");
  const int dz = as.dim() - as.d;

  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<size_t>(n));

  if (dz == 1) {
    // the slice is an interval in z; sample it exactly
    Eigen::VectorXd base = as.w1 * y;
    Eigen::VectorXd dir = as.w2.col(0);
    bool empty = false;
    Interval iv = feasible_interval(base, dir, dom, empty);
    if (empty)
      throw NumericError("sample_inactive: empty slice at y=" +
                         point_to_string(y));
    rng::Rng r(rng::derive(seed, 0));
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd z(1);
      z[0] = r.uniform(iv.lo, iv.hi);
      out.push_back(z);
    }
    return out;
  }

  // hit-and-run over the slice polytope
  Eigen::VectorXd x = feasible_slice_point(as, dom, y);
  Eigen::VectorXd z = as.w2.transpose() * x;
  x = as.lift(y, z);
  rng::Rng r(rng::derive(seed, 0));
  const int burn_in = 50 * dz;
  const int total = burn_in + n;
  Eigen::VectorXd u(dz);
  for (int step = 0; step < total; ++step) {
    for (int j = 0; j < dz; ++j) u[j] = r.normal();
    double nrm = u.norm();
    if (nrm <= 0.0) continue;
    u /= nrm;
    Eigen::VectorXd v = as.w2 * u;
    bool empty = false;
    Interval iv = feasible_interval(x, v, dom, empty);
    if (empty)
      throw NumericError(
          "sample_inactive: hit-and-run lost feasibility at y=" +
          point_to_string(y) + " step=" + std::to_string(step));
    double alpha = r.uniform(iv.lo, iv.hi);
    z += alpha * u;
    x += alpha * v;
    if ((step & 63) == 63) x = as.lift(y, z);  // curb roundoff drift
    if (step >= burn_in) out.push_back(z);
  }
  return out;
}

double f_mc(const ActiveSubspace& as, const Domain& dom,
            const std::function<double(const Eigen::VectorXd&)>& f,
            const Eigen::VectorXd& y, int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("f_mc: need n >= 1");
  auto zs = sample_inactive(as, dom, y, n, seed);
  double acc = 0.0;
  for (const auto& z : zs) {
    double v = f(as.lift(y, z));
    if (!std::isfinite(v))
      throw NumericError("f_mc: non-finite value at z=" + point_to_string(z));
    acc += v;
  }
  return acc / static_cast<double>(n);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> projected_range(
    const Eigen::MatrixXd& map, const Domain& dom) {
  const int d = static_cast<int>(map.cols());
  Eigen::VectorXd lo = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd hi = Eigen::VectorXd::Zero(d);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < dom.dim(); ++i) {
      double a = map(i, j) * dom.lower[i];
      double b = map(i, j) * dom.upper[i];
      lo[j] += std::min(a, b);
      hi[j] += std::max(a, b);
    }
  }
  return {lo, hi};
}

nlohmann::json ActiveSubspace::to_json() const {
  return nlohmann::json{{"d", d},
                        {"eigenvalues", io::to_vector(eigenvalues)},
                        {"W1", io::to_row_major(w1)},
                        {"W2", io::to_row_major(w2)},
                        {"degenerate_gap", degenerate_gap}};
}

ActiveSubspace ActiveSubspace::from_json(const nlohmann::json& j) {
  ActiveSubspace as;
  as.d = j.at("d").get<int>();
  as.eigenvalues = io::from_vector(j.at("eigenvalues").get<std::vector<double>>());
  const int dim = static_cast<int>(as.eigenvalues.size());
  as.w1 = io::from_row_major(j.at("W1").get<std::vector<double>>(), dim, as.d);
  as.w2 =
      io::from_row_major(j.at("W2").get<std::vector<double>>(), dim, dim - as.d);
  as.degenerate_gap = j.value("degenerate_gap", false);
  return as;
}

}  // namespace casm
