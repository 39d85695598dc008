#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <cstdint>
#include <memory>
#include <string>

#include "fracpat/fem.hpp"
#include "fracpat/fracwave.hpp"
#include "fracpat/mesh.hpp"

namespace fracpat {

enum class PriorKind { BiLaplacian, OrnsteinUhlenbeck };

PriorKind parse_prior_kind(const std::string& name);
std::string to_string(PriorKind kind);

struct PriorSpec {
  PriorKind kind = PriorKind::BiLaplacian;
  double gamma = 1.0;
  double delta = 8.0;
  double eta = 0.1;
  double ell = 0.1;
  Field mean;  // empty means zero

  void validate() const;
};

/// M-orthonormal eigenvectors of the prior covariance with eigenvalues in
/// nonincreasing order.
struct ProjectionBasis {
  Eigen::MatrixXd vectors;  // n x N
  Eigen::VectorXd lambda;   // N
  double full_trace = 0.0;  // sum of all n eigenvalues

  [[nodiscard]] int rank() const { return static_cast<int>(lambda.size()); }
  [[nodiscard]] double tail_trace() const { return full_trace - lambda.sum(); }
};

/// Gaussian prior covariance Gamma_pr as an M-self-adjoint operator on nodal
/// coefficient vectors.
class Prior {
 public:
  virtual ~Prior() = default;

  [[nodiscard]] virtual PriorKind kind() const = 0;
  [[nodiscard]] virtual Field apply(const Field& a) const = 0;
  [[nodiscard]] virtual Field apply_inv(const Field& a) const = 0;
  /// Dense matrix of Gamma_pr^{-1} acting on coefficient vectors.
  [[nodiscard]] virtual Eigen::MatrixXd dense_inverse() const = 0;
  /// All n eigenpairs, sorted by nonincreasing eigenvalue, M-orthonormal.
  virtual void full_eigensystem(Eigen::VectorXd& lambda, Eigen::MatrixXd& vectors) const = 0;

  [[nodiscard]] ProjectionBasis eigenbasis(int rank) const;
  [[nodiscard]] const Field& mean() const { return mean_; }
  [[nodiscard]] int size() const { return static_cast<int>(mean_.size()); }
  [[nodiscard]] const SparseMatrix& mass() const { return mass_; }

 protected:
  Prior(const SparseMatrix& mass, Field mean);
  [[nodiscard]] Field solve_mass(const Field& v) const;

  SparseMatrix mass_;
  Eigen::SimplicialLDLT<SparseMatrix> mass_solver_;
  Field mean_;
};

/// Gamma_pr = (K^{-1} M)^2 with K = delta * stiffness + gamma * M.
class BiLaplacianPrior final : public Prior {
 public:
  BiLaplacianPrior(const FemMatrices& fem, double gamma, double delta, Field mean);

  [[nodiscard]] PriorKind kind() const override { return PriorKind::BiLaplacian; }
  [[nodiscard]] Field apply(const Field& a) const override;
  [[nodiscard]] Field apply_inv(const Field& a) const override;
  [[nodiscard]] Eigen::MatrixXd dense_inverse() const override;
  void full_eigensystem(Eigen::VectorXd& lambda, Eigen::MatrixXd& vectors) const override;

 private:
  SparseMatrix op_;
  Eigen::SimplicialLDLT<SparseMatrix> op_solver_;
};

/// Nodal coefficient covariance C_ij = eta^2 exp(-|x_i - x_j| / ell); as an
/// operator in the M inner product, Gamma_pr = C M.
class OrnsteinUhlenbeckPrior final : public Prior {
 public:
  OrnsteinUhlenbeckPrior(const Mesh& mesh, const SparseMatrix& mass, double eta, double ell, Field mean);

  [[nodiscard]] PriorKind kind() const override { return PriorKind::OrnsteinUhlenbeck; }
  [[nodiscard]] Field apply(const Field& a) const override;
  [[nodiscard]] Field apply_inv(const Field& a) const override;
  [[nodiscard]] Eigen::MatrixXd dense_inverse() const override;
  void full_eigensystem(Eigen::VectorXd& lambda, Eigen::MatrixXd& vectors) const override;

  [[nodiscard]] const Eigen::MatrixXd& covariance() const { return cov_; }

 private:
  Eigen::MatrixXd cov_;
  Eigen::LLT<Eigen::MatrixXd> cov_llt_;
};

std::unique_ptr<Prior> make_prior(const PriorSpec& spec, const Mesh& mesh, const FemMatrices& fem);

/// a0 + sum_{k<N} sqrt(lambda_k) xi_k e_k with xi ~ N(0, 1), deterministic per seed.
Field sample_prior(const ProjectionBasis& basis, const Field& mean, std::uint64_t seed);

}  // namespace fracpat
