#include "casm/reduced_optimize.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "casm/active_subspace.hpp"
#include "casm/io.hpp"

namespace casm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct LeastNormResult {
  Eigen::VectorXd x;
  double eq_residual = 0.0;
  double box_dist = 0.0;
  double kkt_residual = 0.0;
  bool ok = false;
};

// min |x|^2 s.t. A x = b, x in box. Dykstra's alternating projections from
// the origin converge to the projection of 0 onto the intersection, i.e.
// exactly the min-norm point.
LeastNormResult least_norm_in_box(const Eigen::MatrixXd& a,
                                  const Eigen::VectorXd& b, const Domain& dom,
                                  double tol) {
  LeastNormResult out;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);

  auto project_affine = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return x - cod.solve(a * x - b);
  };

  Eigen::VectorXd x = project_affine(Eigen::VectorXd::Zero(a.cols()));
  out.eq_residual = (a * x - b).norm();
  if (out.eq_residual > std::max(tol, 1e-10 * (1.0 + b.norm()))) {
    // inconsistent equality targets; report the best least-squares point
    out.x = dom.clamp(x);
    out.box_dist = 0.0;
    out.ok = false;
    out.eq_residual = (a * out.x - b).norm();
    return out;
  }

  if (!dom.contains(x, 1e-12)) {
    // Dykstra increments for the two sets
    Eigen::VectorXd p = Eigen::VectorXd::Zero(x.size());
    Eigen::VectorXd q = Eigen::VectorXd::Zero(x.size());
    x.setZero();
    for (int round = 0; round < 500; ++round) {
      Eigen::VectorXd y = project_affine(x + p);
      p = x + p - y;
      Eigen::VectorXd xn = dom.clamp(y + q);
      q = y + q - xn;
      double move = (xn - x).lpNorm<Eigen::Infinity>();
      x = xn;
      if (move < 1e-14 && (a * x - b).norm() < 0.1 * tol) break;
    }
  }

  out.x = x;
  out.eq_residual = (a * x - b).norm();
  out.box_dist = dom.box_distance(x);

  // KKT stationarity of the min-norm QP: 2x + A^T nu - lambda_l + lambda_u = 0
  // with the bound multipliers sign-constrained. Fit nu on the free set and
  // check the sign conditions on the rest.
  const double edge = 1e-9 * (dom.upper - dom.lower).maxCoeff();
  std::vector<int> free_idx;
  for (int i = 0; i < x.size(); ++i)
    if (x[i] > dom.lower[i] + edge && x[i] < dom.upper[i] - edge)
      free_idx.push_back(i);
  Eigen::MatrixXd at = a.transpose();
  Eigen::MatrixXd bt(free_idx.size(), a.rows());
  Eigen::VectorXd rhs(free_idx.size());
  for (size_t r = 0; r < free_idx.size(); ++r) {
    bt.row(static_cast<Eigen::Index>(r)) = at.row(free_idx[r]);
    rhs[static_cast<Eigen::Index>(r)] = -2.0 * x[free_idx[r]];
  }
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(a.rows());
  if (!free_idx.empty())
    nu = bt.completeOrthogonalDecomposition().solve(rhs);
  Eigen::VectorXd stat = 2.0 * x + at * nu;
  double kkt = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    bool at_lower = x[i] <= dom.lower[i] + edge;
    bool at_upper = x[i] >= dom.upper[i] - edge;
    if (at_lower && !at_upper)
      kkt = std::max(kkt, std::max(0.0, -stat[i]));  // lambda_l >= 0
    else if (at_upper && !at_lower)
      kkt = std::max(kkt, std::max(0.0, stat[i]));  // lambda_u >= 0
    else if (!at_lower && !at_upper)
      kkt = std::max(kkt, std::abs(stat[i]));
  }
  out.kkt_residual = kkt;
  out.ok = out.eq_residual <= tol && out.box_dist <= tol;
  return out;
}

}  // namespace

PullbackResult pullback(const Eigen::VectorXd& y_f, const Eigen::VectorXd& y_g,
                        const Eigen::MatrixXd& u1, const Eigen::MatrixXd& w1,
                        const Domain& dom, double tol) {
  if (u1.rows() != w1.rows() || u1.rows() != dom.dim())
    throw ConfigError("pullback: map dimensions do not match the domain");
  const int mf = static_cast<int>(u1.cols());
  const int mg = static_cast<int>(w1.cols());
  Eigen::MatrixXd a(mf + mg, dom.dim());
  a.topRows(mf) = u1.transpose();
  a.bottomRows(mg) = w1.transpose();
  Eigen::VectorXd b(mf + mg);
  b.head(mf) = y_f;
  b.tail(mg) = y_g;

  LeastNormResult core = least_norm_in_box(a, b, dom, tol);
  PullbackResult out;
  out.x = core.x;
  out.residual_y_f = (y_f - u1.transpose() * core.x).norm();
  out.residual_y_g = (y_g - w1.transpose() * core.x).norm();
  out.box_dist = core.box_dist;
  out.kkt_residual = core.kkt_residual;
  out.feasible = out.residual_y_f <= tol && out.residual_y_g <= tol &&
                 out.box_dist <= tol;
  return out;
}

double coupling(const Eigen::VectorXd& y_f, const Eigen::VectorXd& y_g,
                const PullbackResult& result) {
  (void)y_f;
  (void)y_g;
  return result.residual_y_f + result.residual_y_g + result.box_dist;
}

namespace {

struct Candidate {
  bool seed_consistent = false;  // the raw grid pair itself was attainable
  bool feasible = false;
  double objective = kInf;
  double constraint = kInf;
  Eigen::VectorXd x;
  Eigen::VectorXd y_f;  // projections of x; the pair they form couples by
  Eigen::VectorXd y_g;  // construction
};

// Shared machinery for the grid search: the stacked map is fixed, so its
// decomposition is computed once and every candidate reuses it.
class CandidateFactory {
 public:
  explicit CandidateFactory(const ReducedProblem& p)
      : p_(p), d_f_(static_cast<int>(p.u1.cols())) {
    Eigen::MatrixXd a(p.u1.cols() + p.w1.cols(), p.domain.dim());
    a.topRows(p.u1.cols()) = p.u1.transpose();
    a.bottomRows(p.w1.cols()) = p.w1.transpose();
    a_ = a;
    cod_.compute(a_);
  }

  // Pull the seed pair back to the box and re-project. The candidate's two
  // reduced points always share the preimage x, so their coupling is zero
  // even when the seed pair itself was unattainable.
  Candidate make(const Eigen::VectorXd& y_f_seed,
                 const Eigen::VectorXd& y_g_seed) const {
    Eigen::VectorXd b(a_.rows());
    b.head(d_f_) = y_f_seed;
    b.tail(b.size() - d_f_) = y_g_seed;

    Eigen::VectorXd x = cod_.solve(b);
    if (!p_.domain.contains(x, 1e-12)) x = solve_clamped(b, x);

    Candidate c;
    c.x = x;
    c.seed_consistent = (a_ * x - b).norm() <= p_.coupling_tol;
    c.y_f = p_.u1.transpose() * x;
    c.y_g = p_.w1.transpose() * x;
    c.constraint = p_.constraint(c.y_g);
    if (c.constraint <= 0.0) {
      c.feasible = true;
      c.objective = p_.objective(c.y_f);
    }
    return c;
  }

 private:
  // The min-norm point with an active box has the dual form
  // x = clamp(A^T mu); Newton on the m-dimensional multiplier with the
  // active-set Jacobian. Best effort: unattainable seeds leave a residual
  // that the caller's re-projection absorbs.
  Eigen::VectorXd solve_clamped(const Eigen::VectorXd& b,
                                const Eigen::VectorXd& interior_guess) const {
    // multiplier of the box-free least-norm solution seeds the iteration
    Eigen::VectorXd mu = (a_ * a_.transpose()).ldlt().solve(b);
    Eigen::VectorXd x = interior_guess;
    double prev_res = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_x;
    for (int it = 0; it < 60; ++it) {
      x = p_.domain.clamp(a_.transpose() * mu);
      Eigen::VectorXd g = a_ * x - b;
      double res = g.norm();
      if (res < prev_res) {
        prev_res = res;
        best_x = x;
      }
      if (res <= 1e-12 * (1.0 + b.norm())) break;
      // Jacobian restricted to the inactive coordinates
      Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(a_.rows(), a_.rows());
      Eigen::VectorXd raw = a_.transpose() * mu;
      for (int i = 0; i < raw.size(); ++i) {
        if (raw[i] <= p_.domain.lower[i] || raw[i] >= p_.domain.upper[i])
          continue;
        jac.noalias() += a_.col(i) * a_.col(i).transpose();
      }
      jac.diagonal().array() += 1e-12;
      Eigen::VectorXd step = jac.ldlt().solve(g);
      if (!step.allFinite()) break;
      mu -= step;
    }
    return best_x.size() ? best_x : x;
  }

  const ReducedProblem& p_;
  int d_f_;
  Eigen::MatrixXd a_;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_;
};

}  // namespace

ReducedSolution solve_reduced(const ReducedProblem& problem,
                              const ReducedSolverConfig& cfg) {
  const int d_f = static_cast<int>(problem.u1.cols());
  const int d_g = static_cast<int>(problem.w1.cols());
  if (d_f < 1 || d_f > 3 || d_g < 1 || d_g > 3)
    throw ConfigError("solve_reduced: reduced dimensions must be in [1, 3]");
  if (cfg.grid_points < 2) throw ConfigError("solve_reduced: grid too small");

  const int dims = d_f + d_g;
  auto [lo_f, hi_f] = projected_range(problem.u1, problem.domain);
  auto [lo_g, hi_g] = projected_range(problem.w1, problem.domain);
  Eigen::VectorXd lo(dims), hi(dims);
  lo << lo_f, lo_g;
  hi << hi_f, hi_g;

  const int g = cfg.grid_points;
  long total = 1;
  for (int j = 0; j < dims; ++j) {
    total *= g;
    if (total > 50'000'000L)
      throw ConfigError(
          "solve_reduced: grid too large for the combined reduced "
          "dimensions; lower grid_points");
  }

  ReducedTraceSummary trace;
  trace.grid_total = total;

  CandidateFactory factory(problem);
  Candidate best;
  Eigen::VectorXd best_seed(dims);
  Eigen::VectorXd seed(dims);
  for (long flat = 0; flat < total; ++flat) {
    long rem = flat;
    for (int j = 0; j < dims; ++j) {
      seed[j] = lo[j] + (hi[j] - lo[j]) * (rem % g) / (g - 1);
      rem /= g;
    }
    Candidate c = factory.make(seed.head(d_f), seed.tail(d_g));
    if (c.seed_consistent) ++trace.grid_pullback_ok;
    if (c.feasible) {
      ++trace.grid_feasible;
      if (c.objective < best.objective) {
        best = c;
        best_seed = seed;
      }
    }
  }
  if (!best.feasible)
    throw ReducedInfeasibleError(
        "reduced problem infeasible: no grid candidate satisfies the biased "
        "constraint (over-biased surrogate or empty projected feasible set)");

  // coordinatewise golden-section on the seed pair around the best cell;
  // infeasible points count as +inf and the best evaluated point is kept
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  auto filtered = [&](const Eigen::VectorXd& sq) {
    ++trace.refine_evals;
    Candidate c = factory.make(sq.head(d_f), sq.tail(d_g));
    if (c.feasible && c.objective < best.objective) {
      best = c;
      best_seed = sq;
    }
    return c.feasible ? c.objective : kInf;
  };
  for (int sweep = 0; sweep < cfg.refine_sweeps; ++sweep) {
    for (int j = 0; j < dims; ++j) {
      double cell = (hi[j] - lo[j]) / (g - 1);
      Eigen::VectorXd sq = best_seed;
      double a = std::max(lo[j], best_seed[j] - cell);
      double b = std::min(hi[j], best_seed[j] + cell);
      double c1 = b - phi * (b - a);
      double d1 = a + phi * (b - a);
      sq[j] = c1;
      double fc = filtered(sq);
      sq[j] = d1;
      double fd = filtered(sq);
      for (int it = 0; it < cfg.refine_iterations; ++it) {
        if (fc < fd) {
          b = d1;
          d1 = c1;
          fd = fc;
          c1 = b - phi * (b - a);
          sq[j] = c1;
          fc = filtered(sq);
        } else {
          a = c1;
          c1 = d1;
          fc = fd;
          d1 = a + phi * (b - a);
          sq[j] = d1;
          fd = filtered(sq);
        }
      }
    }
  }

  ReducedSolution sol;
  sol.y_f = best.y_f;
  sol.y_g = best.y_g;
  sol.x = best.x;
  sol.objective_value = best.objective;
  sol.constraint_value = best.constraint;
  PullbackResult pb =
      pullback(sol.y_f, sol.y_g, problem.u1, problem.w1, problem.domain,
               problem.coupling_tol);
  sol.coupling_value = coupling(sol.y_f, sol.y_g, pb);
  sol.trace = trace;
  return sol;
}

FullSolution solve_full(const ObjectiveFn& objective,
                        const ObjectiveFn& constraint, const Domain& dom,
                        const FullSolverConfig& cfg) {
  Eigen::VectorXd x = cfg.start ? dom.clamp(*cfg.start)
                                : (0.5 * (dom.lower + dom.upper)).eval();
  double lambda = 0.0;
  double mu = cfg.initial_penalty;
  double prev_violation = kInf;

  auto augmented = [&](const Eigen::VectorXd& xq, GradientSample& f,
                       GradientSample& gcon) {
    f = objective(xq);
    gcon = constraint(xq);
    double shifted = gcon.value + lambda / mu;
    double value = f.value;
    Eigen::VectorXd grad = f.gradient;
    if (shifted > 0.0) {
      value += 0.5 * mu * shifted * shifted;
      grad += mu * shifted * gcon.gradient;
    }
    return std::make_pair(value, grad);
  };

  FullSolution out;
  GradientSample f, gcon;
  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    out.outer_iterations = outer + 1;

    // projected gradient with backtracking on the augmented objective
    double step = 1.0;
    auto [val, grad] = augmented(x, f, gcon);
    for (int inner = 0; inner < cfg.max_inner; ++inner) {
      Eigen::VectorXd trial;
      Eigen::VectorXd dir;
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        trial = dom.clamp(x - step * grad);
        dir = trial - x;
        if (dir.lpNorm<Eigen::Infinity>() == 0.0) break;
        GradientSample tf, tg;
        auto [tv, tgrad] = augmented(trial, tf, tg);
        if (tv <= val + 1e-4 * grad.dot(dir)) {
          x = trial;
          val = tv;
          grad = tgrad;
          f = tf;
          gcon = tg;
          step *= 2.0;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      double proj_res = (x - dom.clamp(x - grad)).lpNorm<Eigen::Infinity>();
      if (!accepted || proj_res <= 0.1 * cfg.kkt_tol) break;
    }

    double violation = std::max(0.0, gcon.value);
    lambda = std::max(0.0, lambda + mu * gcon.value);

    // KKT for the original problem at the current multiplier
    Eigen::VectorXd lag_grad = f.gradient + lambda * gcon.gradient;
    double stat = (x - dom.clamp(x - lag_grad)).lpNorm<Eigen::Infinity>();
    double comp = std::abs(lambda * gcon.value);
    out.kkt_residual = std::max({stat, violation, comp});
    if (out.kkt_residual <= cfg.kkt_tol) {
      out.converged = true;
      break;
    }
    if (violation > 0.25 * prev_violation) mu *= cfg.penalty_growth;
    prev_violation = std::max(violation, 1e-300);
  }

  out.x = x;
  out.value = f.value;
  out.constraint_value = gcon.value;
  return out;
}

nlohmann::json ReducedSolution::to_json(
    std::optional<double> constraint_value_exact) const {
  nlohmann::json j{
      {"y_F", io::to_vector(y_f)},
      {"y_G", io::to_vector(y_g)},
      {"x_star", io::to_vector(x)},
      {"objective_value", objective_value},
      {"constraint_value_surrogate", constraint_value},
      {"coupling", coupling_value},
      {"solver_trace_summary",
       {{"grid_total", trace.grid_total},
        {"grid_pullback_ok", trace.grid_pullback_ok},
        {"grid_feasible", trace.grid_feasible},
        {"refine_evals", trace.refine_evals}}}};
  if (constraint_value_exact)
    j["constraint_value_exact"] = *constraint_value_exact;
  return j;
}

}  // namespace casm
