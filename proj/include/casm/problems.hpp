#pragma once

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "casm/domain.hpp"
#include "casm/gradient_source.hpp"

namespace casm {

// Multivariate polynomial with analytic gradient. Custom problem files and
// the built-in demo constraint both use this representation.
struct Polynomial {
  struct Term {
    double coef = 0.0;
    std::vector<int> powers;  // one exponent per coordinate
  };
  std::vector<Term> terms;
  int dimension = 0;

  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  GradientSource as_gradient_source() const;

  nlohmann::json to_json() const;
  static Polynomial from_json(const nlohmann::json& j);
};

// An optimization instance: box domain, inequality constraint (feasible
// <= 0) and an optional linear-ish objective.
struct ProblemSpec {
  std::string name;
  Domain domain{Eigen::VectorXd(), Eigen::VectorXd()};
  Polynomial constraint;
  std::optional<Polynomial> objective;

  // (x1 + 2 x2)^2 + x1 - x2 - 3 on [-1,1]^2, with objective x1 + x2
  static ProblemSpec demo2d();
  static ProblemSpec from_json(const nlohmann::json& j);
  static ProblemSpec from_file(const std::string& path);
};

}  // namespace casm
