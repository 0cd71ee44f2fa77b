#include "casm/problems.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "casm/errors.hpp"
#include "casm/io.hpp"

namespace casm {

double Polynomial::value(const Eigen::VectorXd& x) const {
  double acc = 0.0;
  for (const auto& t : terms) {
    double v = t.coef;
    for (int i = 0; i < dimension; ++i)
      for (int p = 0; p < t.powers[static_cast<size_t>(i)]; ++p) v *= x[i];
    acc += v;
  }
  return acc;
}

Eigen::VectorXd Polynomial::gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dimension);
  for (const auto& t : terms) {
    for (int i = 0; i < dimension; ++i) {
      int pi = t.powers[static_cast<size_t>(i)];
      if (pi == 0) continue;
      double v = t.coef * pi;
      for (int j = 0; j < dimension; ++j) {
        int pj = t.powers[static_cast<size_t>(j)] - (j == i ? 1 : 0);
        for (int p = 0; p < pj; ++p) v *= x[j];
      }
      g[i] += v;
    }
  }
  return g;
}

GradientSource Polynomial::as_gradient_source() const {
  Polynomial self = *this;
  return GradientSource::analytic([self](const Eigen::VectorXd& x) {
    return GradientSample{self.value(x), self.gradient(x)};
  });
}

nlohmann::json Polynomial::to_json() const {
  nlohmann::json jterms = nlohmann::json::array();
  for (const auto& t : terms)
    jterms.push_back({{"coef", t.coef}, {"powers", t.powers}});
  return nlohmann::json{{"dimension", dimension}, {"terms", jterms}};
}

Polynomial Polynomial::from_json(const nlohmann::json& j) {
  Polynomial p;
  p.dimension = j.at("dimension").get<int>();
  if (p.dimension < 1) throw ConfigError("polynomial: dimension must be >= 1");
  for (const auto& jt : j.at("terms")) {
    Term t;
    t.coef = jt.at("coef").get<double>();
    t.powers = jt.at("powers").get<std::vector<int>>();
    if (static_cast<int>(t.powers.size()) != p.dimension)
      throw ConfigError("polynomial: powers length != dimension");
    for (int pw : t.powers)
      if (pw < 0) throw ConfigError("polynomial: negative exponent");
    p.terms.push_back(std::move(t));
  }
  return p;
}

ProblemSpec ProblemSpec::demo2d() {
  ProblemSpec p;
  p.name = "toy";
  p.domain = Domain::symmetric(2, 1.0);
  // (x1 + 2 x2)^2 + x1 - x2 - 3 = x1^2 + 4 x1 x2 + 4 x2^2 + x1 - x2 - 3
  p.constraint.dimension = 2;
  p.constraint.terms = {{1.0, {2, 0}}, {4.0, {1, 1}}, {4.0, {0, 2}},
                        {1.0, {1, 0}}, {-1.0, {0, 1}}, {-3.0, {0, 0}}};
  Polynomial obj;
  obj.dimension = 2;
  obj.terms = {{1.0, {1, 0}}, {1.0, {0, 1}}};
  p.objective = obj;
  return p;
}

ProblemSpec ProblemSpec::from_json(const nlohmann::json& j) {
  ProblemSpec p;
  p.name = j.value("name", std::string("custom"));
  auto lo = io::from_vector(j.at("lower").get<std::vector<double>>());
  auto hi = io::from_vector(j.at("upper").get<std::vector<double>>());
  p.domain = Domain::box(lo, hi);
  p.constraint = Polynomial::from_json(j.at("constraint"));
  if (p.constraint.dimension != p.domain.dim())
    throw ConfigError("problem: constraint dimension != domain dimension");
  if (j.contains("objective")) {
    p.objective = Polynomial::from_json(j.at("objective"));
    if (p.objective->dimension != p.domain.dim())
      throw ConfigError("problem: objective dimension != domain dimension");
  }
  return p;
}

ProblemSpec ProblemSpec::from_file(const std::string& path) {
  return from_json(io::read_json(path));
}

}  // namespace casm
