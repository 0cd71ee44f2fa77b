#include "casm/fem.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <cmath>
#include <cstring>

#include "casm/errors.hpp"
#include "casm/io.hpp"

namespace casm {

namespace {

std::uint64_t fnv1a(const void* data, size_t bytes, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t hash_doubles(const double* data, size_t count, std::uint64_t h) {
  return fnv1a(data, count * sizeof(double), h);
}

}  // namespace

double default_source(double x, double y) {
  double t = 1.0 - std::abs(x) - std::abs(y);
  double t2 = t * t;
  return 56.0 * t2 * t2 * t2;
}

TriMesh build_mesh(int n) {
  if (n < 2) throw ConfigError("build_mesh: need n >= 2");
  TriMesh m;
  const int nv = (n + 1) * (n + 1);
  m.vertices.reserve(static_cast<size_t>(nv));
  for (int r = 0; r <= n; ++r)
    for (int c = 0; c <= n; ++c)
      m.vertices.emplace_back(-1.0 + 2.0 * c / n, -1.0 + 2.0 * r / n);

  auto vid = [&](int r, int c) { return r * (n + 1) + c; };
  m.elements.reserve(static_cast<size_t>(2 * n * n));
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      int bl = vid(r, c), br = vid(r, c + 1);
      int tr = vid(r + 1, c + 1), tl = vid(r + 1, c);
      m.elements.push_back({bl, br, tr});
      m.elements.push_back({bl, tr, tl});
    }

  for (int r = 0; r <= n; ++r)
    for (int c = 0; c <= n; ++c)
      if (r == 0 || r == n || c == 0 || c == n)
        m.boundary_vertices.push_back(vid(r, c));

  m.interior_index.assign(static_cast<size_t>(nv), -1);
  std::vector<bool> on_boundary(static_cast<size_t>(nv), false);
  for (int v : m.boundary_vertices) on_boundary[static_cast<size_t>(v)] = true;
  for (int v = 0; v < nv; ++v)
    if (!on_boundary[static_cast<size_t>(v)])
      m.interior_index[static_cast<size_t>(v)] = m.interior_count++;

  m.areas.reserve(m.elements.size());
  m.basis_gradients.reserve(m.elements.size());
  for (const auto& e : m.elements) {
    const Eigen::Vector2d& p0 = m.vertices[static_cast<size_t>(e[0])];
    const Eigen::Vector2d& p1 = m.vertices[static_cast<size_t>(e[1])];
    const Eigen::Vector2d& p2 = m.vertices[static_cast<size_t>(e[2])];
    double twice_area = (p1.x() - p0.x()) * (p2.y() - p0.y()) -
                        (p2.x() - p0.x()) * (p1.y() - p0.y());
    if (twice_area <= 0.0)
      throw NumericError("build_mesh: non-positive element area");
    m.areas.push_back(0.5 * twice_area);
    Eigen::Matrix<double, 2, 3> g;
    // grad of barycentric basis: rotated opposite edges / (2 area)
    g.col(0) << p1.y() - p2.y(), p2.x() - p1.x();
    g.col(1) << p2.y() - p0.y(), p0.x() - p2.x();
    g.col(2) << p0.y() - p1.y(), p1.x() - p0.x();
    g /= twice_area;
    m.basis_gradients.push_back(g);
  }
  return m;
}

std::uint64_t TriMesh::geometry_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& v : vertices) h = hash_doubles(v.data(), 2, h);
  for (const auto& e : elements) h = fnv1a(e.data(), sizeof(int) * 3, h);
  return h;
}

std::string TriMesh::to_csv() const {
  std::string out = "element,v0,v1,v2\n";
  for (size_t i = 0; i < elements.size(); ++i)
    out += std::to_string(i) + "," + std::to_string(elements[i][0]) + "," +
           std::to_string(elements[i][1]) + "," +
           std::to_string(elements[i][2]) + "\n";
  return out;
}

DesignField DesignField::clamped(Eigen::VectorXd values) {
  DesignField f;
  f.theta = values.cwiseMax(0.0).cwiseMin(1.0);
  return f;
}

std::string DesignField::to_csv() const {
  std::string out = "element,theta\n";
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    out += std::to_string(i) + "," + io::format_sci(theta[i]) + "\n";
  return out;
}

std::string DesignField::to_grid_text(int n) const {
  if (theta.size() != 2 * n * n)
    throw ConfigError("to_grid_text: theta length does not match the mesh");
  std::string out;
  for (int r = n - 1; r >= 0; --r) {  // top row first
    for (int c = 0; c < n; ++c) {
      if (c) out += ' ';
      int base = 2 * (r * n + c);
      out += io::format_sci(0.5 * (theta[base] + theta[base + 1]));
    }
    out += '\n';
  }
  return out;
}

std::uint64_t assembly_hash(const TriMesh& mesh, const DesignField& theta,
                            double k1, double k2) {
  std::uint64_t h = mesh.geometry_hash();
  h = hash_doubles(theta.theta.data(), static_cast<size_t>(theta.theta.size()), h);
  h = hash_doubles(&k1, 1, h);
  h = hash_doubles(&k2, 1, h);
  return h;
}

FemSolution assemble_solve(const TriMesh& mesh, const DesignField& theta,
                           double k1, double k2, const SourceFn& source) {
  if (!(k1 > 0.0 && k2 > 0.0))
    throw ConfigError("assemble_solve: conductivities must be positive");
  if (theta.theta.size() != mesh.element_count())
    throw ConfigError("assemble_solve: theta length != element count");

  const int ni = mesh.interior_count;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(mesh.element_count()) * 9);
  Eigen::VectorXd load = Eigen::VectorXd::Zero(ni);

  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto& el = mesh.elements[static_cast<size_t>(e)];
    const auto& g = mesh.basis_gradients[static_cast<size_t>(e)];
    double area = mesh.areas[static_cast<size_t>(e)];
    double k = k1 * theta.theta[e] + k2 * (1.0 - theta.theta[e]);

    // edge midpoints carry the 3-point degree-2 quadrature
    const Eigen::Vector2d& p0 = mesh.vertices[static_cast<size_t>(el[0])];
    const Eigen::Vector2d& p1 = mesh.vertices[static_cast<size_t>(el[1])];
    const Eigen::Vector2d& p2 = mesh.vertices[static_cast<size_t>(el[2])];
    Eigen::Vector2d m01 = 0.5 * (p0 + p1);
    Eigen::Vector2d m12 = 0.5 * (p1 + p2);
    Eigen::Vector2d m20 = 0.5 * (p2 + p0);
    double f01 = source(m01.x(), m01.y());
    double f12 = source(m12.x(), m12.y());
    double f20 = source(m20.x(), m20.y());
    double w = area / 3.0 * 0.5;  // quadrature weight times basis value 1/2
    std::array<double, 3> le = {w * (f01 + f20), w * (f01 + f12),
                                w * (f12 + f20)};

    for (int a = 0; a < 3; ++a) {
      int ia = mesh.interior_index[static_cast<size_t>(el[a])];
      if (ia < 0) continue;
      load[ia] += le[static_cast<size_t>(a)];
      for (int b = 0; b < 3; ++b) {
        int ib = mesh.interior_index[static_cast<size_t>(el[b])];
        if (ib < 0) continue;
        triplets.emplace_back(ia, ib, k * area * g.col(a).dot(g.col(b)));
      }
    }
  }

  Eigen::SparseMatrix<double> stiffness(ni, ni);
  stiffness.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(stiffness);
  if (solver.info() != Eigen::Success)
    throw NumericError("assemble_solve: factorization failed");
  Eigen::VectorXd ui = solver.solve(load);

  double load_norm = load.norm();
  if (load_norm > 0.0) {
    double rel = (stiffness * ui - load).norm() / load_norm;
    if (rel > 1e-10)
      throw NumericError("assemble_solve: relative residual " +
                         std::to_string(rel) + " exceeds 1e-10");
  }

  FemSolution sol;
  sol.u = Eigen::VectorXd::Zero(mesh.vertex_count());
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    int iv = mesh.interior_index[static_cast<size_t>(v)];
    if (iv >= 0) sol.u[v] = ui[iv];
  }
  sol.energy = 0.5 * load.dot(ui);
  sol.assembled_for = assembly_hash(mesh, theta, k1, k2);
  return sol;
}

namespace {

void check_hash(const FemSolution& sol, const TriMesh& mesh,
                const DesignField& theta, double k1, double k2,
                const char* op) {
  if (sol.assembled_for != assembly_hash(mesh, theta, k1, k2))
    throw NumericError(std::string(op) +
                       ": solution is stale for the given (mesh, theta, k)");
}

}  // namespace

double energy(const FemSolution& sol, const TriMesh& mesh,
              const DesignField& theta, double k1, double k2) {
  check_hash(sol, mesh, theta, k1, k2, "energy");
  double acc = 0.0;
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto& el = mesh.elements[static_cast<size_t>(e)];
    const auto& g = mesh.basis_gradients[static_cast<size_t>(e)];
    Eigen::Vector2d grad = g.col(0) * sol.u[el[0]] + g.col(1) * sol.u[el[1]] +
                           g.col(2) * sol.u[el[2]];
    double k = k1 * theta.theta[e] + k2 * (1.0 - theta.theta[e]);
    acc += 0.5 * k * grad.squaredNorm() * mesh.areas[static_cast<size_t>(e)];
  }
  return acc;
}

double volume(const TriMesh& mesh, const DesignField& theta) {
  if (theta.theta.size() != mesh.element_count())
    throw ConfigError("volume: theta length != element count");
  double acc = 0.0;
  for (int e = 0; e < mesh.element_count(); ++e)
    acc += theta.theta[e] * mesh.areas[static_cast<size_t>(e)];
  return acc;
}

Eigen::VectorXd energy_gradient(const FemSolution& sol, const TriMesh& mesh,
                                const DesignField& theta, double k1,
                                double k2) {
  check_hash(sol, mesh, theta, k1, k2, "energy_gradient");
  Eigen::VectorXd grad(mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto& el = mesh.elements[static_cast<size_t>(e)];
    const auto& g = mesh.basis_gradients[static_cast<size_t>(e)];
    Eigen::Vector2d du = g.col(0) * sol.u[el[0]] + g.col(1) * sol.u[el[1]] +
                         g.col(2) * sol.u[el[2]];
    grad[e] = -0.5 * (k1 - k2) * du.squaredNorm() *
              mesh.areas[static_cast<size_t>(e)];
  }
  return grad;
}

}  // namespace casm
