#pragma once

#include <Eigen/Core>
#include <functional>
#include <utility>

#include "casm/domain.hpp"

namespace casm {

struct GradientSample {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

// Supplies f together with its gradient for covariance estimation. The
// finite-difference mode wraps a value-only callable; stencil points are
// clipped so f is never evaluated outside the box.
class GradientSource {
 public:
  using ValueFn = std::function<double(const Eigen::VectorXd&)>;
  using ValueGradFn = std::function<GradientSample(const Eigen::VectorXd&)>;

  static GradientSource analytic(ValueGradFn f) {
    GradientSource s;
    s.analytic_ = std::move(f);
    return s;
  }

  // step == 0 selects the default of 1e-6 times the box width per coordinate.
  static GradientSource finite_difference(ValueFn f, double step = 0.0) {
    GradientSource s;
    s.value_only_ = std::move(f);
    s.fd_step_ = step;
    return s;
  }

  GradientSample eval(const Eigen::VectorXd& x, const Domain& dom) const {
    if (analytic_) return analytic_(x);
    GradientSample out;
    out.value = value_only_(x);
    out.gradient.resize(x.size());
    for (int i = 0; i < x.size(); ++i) {
      double h = fd_step_ > 0.0 ? fd_step_
                                : 1e-6 * (dom.upper[i] - dom.lower[i]);
      double hi = std::min(x[i] + h, dom.upper[i]);
      double lo = std::max(x[i] - h, dom.lower[i]);
      Eigen::VectorXd xp = x, xm = x;
      xp[i] = hi;
      xm[i] = lo;
      out.gradient[i] = (value_only_(xp) - value_only_(xm)) / (hi - lo);
    }
    return out;
  }

  bool is_analytic() const { return static_cast<bool>(analytic_); }

 private:
  ValueGradFn analytic_;
  ValueFn value_only_;
  double fd_step_ = 0.0;
};

}  // namespace casm
