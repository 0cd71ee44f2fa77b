#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace casm {

// Structured triangulation of [-1,1]^2: an n x n grid of squares, each split
// along the same diagonal. Geometry caches (areas, basis gradients, interior
// numbering) are filled at build time.
struct TriMesh {
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::array<int, 3>> elements;  // counterclockwise
  std::vector<int> boundary_vertices;        // sorted

  std::vector<double> areas;
  std::vector<Eigen::Matrix<double, 2, 3>> basis_gradients;
  std::vector<int> interior_index;  // vertex -> interior dof, -1 on boundary
  int interior_count = 0;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int element_count() const { return static_cast<int>(elements.size()); }
  std::uint64_t geometry_hash() const;
  std::string to_csv() const;  // element index, vertex indices
};

TriMesh build_mesh(int n);

// Per-element material fraction in [0,1] (clamped on construction).
struct DesignField {
  Eigen::VectorXd theta;

  static DesignField clamped(Eigen::VectorXd values);
  std::string to_csv() const;  // element index, theta
  // n x n grid of cell averages (two triangles per cell), one row per line
  std::string to_grid_text(int n) const;
};

struct FemSolution {
  Eigen::VectorXd u;  // nodal values, zero on boundary vertices
  double energy = 0.0;
  std::uint64_t assembled_for = 0;  // hash of (mesh, theta, k1, k2)
};

using SourceFn = std::function<double(double, double)>;

// The heat source of the two-material demo, 56 (1 - |x| - |y|)^6.
double default_source(double x, double y);

std::uint64_t assembly_hash(const TriMesh& mesh, const DesignField& theta,
                            double k1, double k2);

// Piecewise-linear Galerkin solve of the two-material diffusion problem with
// homogeneous Dirichlet conditions; per-element conductivity
// k1 theta_i + k2 (1 - theta_i), load integrated by the 3-point edge-midpoint
// rule.
FemSolution assemble_solve(const TriMesh& mesh, const DesignField& theta,
                           double k1, double k2, const SourceFn& source);

// Element-sum of 0.5 k |grad u|^2 area; agrees with 0.5 l^T u.
double energy(const FemSolution& sol, const TriMesh& mesh,
              const DesignField& theta, double k1, double k2);

// integral of theta
double volume(const TriMesh& mesh, const DesignField& theta);

// Adjoint gradient of the energy: d E / d theta_i = -0.5 (k1 - k2)
// * integral of |grad u|^2 over element i (compliance is self-adjoint).
Eigen::VectorXd energy_gradient(const FemSolution& sol, const TriMesh& mesh,
                                const DesignField& theta, double k1, double k2);

}  // namespace casm
