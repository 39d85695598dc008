#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <iosfwd>
#include <string>

#include "fracpat/mesh.hpp"

namespace fracpat {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// P1 matrices on a Mesh.
///
/// Full matrices act on all (nx+1)^2 nodes; the *_ii blocks are the interior
/// rows/columns used by the wave solver, where the homogeneous Dirichlet
/// condition is imposed by elimination.
struct FemMatrices {
  SparseMatrix mass;       // M
  SparseMatrix stiffness;  // unconstrained Laplacian stiffness
  SparseMatrix prior_op;   // delta * stiffness + gamma * M
  SparseMatrix boundary;   // 1-D P1 mass on the observation loop
  SparseMatrix mass_ii;
  SparseMatrix stiffness_ii;
  /// boundary restricted to the observation nodes, in mesh.obs_nodes order
  Eigen::MatrixXd obs_mass;
  Eigen::VectorXd simpson;  // length nt+1
  double gamma = 1.0;
  double delta = 8.0;
  double T = 0.0;
  int nt = 0;
};

/// Composite Simpson weights on nt (even) uniform steps of [0, T].
Eigen::VectorXd simpson_weights(int nt, double T);

FemMatrices assemble(const Mesh& mesh, double gamma, double delta, int nt, double T);

/// Extracts rows/cols listed in `index` (e.g. interior nodes) from `a`.
SparseMatrix restrict_matrix(const SparseMatrix& a, const std::vector<int>& index);

/// `row col value` lines with 0-based indices.
void write_triplets(std::ostream& os, const SparseMatrix& a);
void write_mesh(std::ostream& os, const Mesh& mesh);

}  // namespace fracpat
