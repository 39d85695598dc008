#include "fracpat/priors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <stdexcept>

namespace fracpat {

namespace {

// Fixes the sign of each eigenvector so its largest-magnitude entry is positive.
void normalize_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index k = 0; k < vectors.cols(); ++k) {
    Eigen::Index imax = 0;
    vectors.col(k).cwiseAbs().maxCoeff(&imax);
    if (vectors(imax, k) < 0.0) vectors.col(k) *= -1.0;
  }
}

}  // namespace

PriorKind parse_prior_kind(const std::string& name) {
  if (name == "bilaplacian") return PriorKind::BiLaplacian;
  if (name == "ornstein_uhlenbeck" || name == "ou") return PriorKind::OrnsteinUhlenbeck;
  throw std::invalid_argument("unknown prior kind '" + name + "'");
}

std::string to_string(PriorKind kind) {
  return kind == PriorKind::BiLaplacian ? "bilaplacian" : "ornstein_uhlenbeck";
}

void PriorSpec::validate() const {
  if (kind == PriorKind::BiLaplacian && !(gamma > 0.0 && delta > 0.0)) {
    throw std::invalid_argument("bi-Laplacian prior needs gamma > 0 and delta > 0");
  }
  if (kind == PriorKind::OrnsteinUhlenbeck && !(eta > 0.0 && ell > 0.0)) {
    throw std::invalid_argument("Ornstein-Uhlenbeck prior needs eta > 0 and ell > 0");
  }
}

Prior::Prior(const SparseMatrix& mass, Field mean) : mass_(mass), mean_(std::move(mean)) {
  if (mean_.size() == 0) mean_ = Field::Zero(mass_.rows());
  if (mean_.size() != mass_.rows()) throw std::invalid_argument("prior mean has the wrong size");
  mass_solver_.compute(mass_);
  if (mass_solver_.info() != Eigen::Success) throw SolverError("prior: mass matrix factorization failed");
}

Field Prior::solve_mass(const Field& v) const { return mass_solver_.solve(v); }

ProjectionBasis Prior::eigenbasis(int rank) const {
  const int n = size();
  if (rank < 1 || rank > n) {
    throw std::invalid_argument("eigenbasis: rank must lie in [1, " + std::to_string(n) + "]");
  }
  Eigen::VectorXd lambda;
  Eigen::MatrixXd vectors;
  full_eigensystem(lambda, vectors);
  ProjectionBasis basis;
  basis.full_trace = lambda.sum();
  basis.lambda = lambda.head(rank);
  basis.vectors = vectors.leftCols(rank);
  return basis;
}

BiLaplacianPrior::BiLaplacianPrior(const FemMatrices& fem, double gamma, double delta, Field mean)
    : Prior(fem.mass, std::move(mean)) {
  if (!(gamma > 0.0 && delta > 0.0)) throw std::invalid_argument("bi-Laplacian prior needs gamma, delta > 0");
  op_ = delta * fem.stiffness + gamma * fem.mass;
  op_solver_.compute(op_);
  if (op_solver_.info() != Eigen::Success) throw SolverError("bi-Laplacian prior: factorization failed");
}

Field BiLaplacianPrior::apply(const Field& a) const {
  const Field t = op_solver_.solve(mass_ * a);
  return op_solver_.solve(mass_ * t);
}

Field BiLaplacianPrior::apply_inv(const Field& a) const {
  const Field t = solve_mass(op_ * a);
  return solve_mass(op_ * t);
}

Eigen::MatrixXd BiLaplacianPrior::dense_inverse() const {
  const Eigen::MatrixXd k = Eigen::MatrixXd(op_);
  const Eigen::MatrixXd minv_k = mass_solver_.solve(k);
  return minv_k * minv_k;
}

void BiLaplacianPrior::full_eigensystem(Eigen::VectorXd& lambda, Eigen::MatrixXd& vectors) const {
  // K x = mu M x with x^T M x = 1; Gamma_pr x = mu^-2 x
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(op_), Eigen::MatrixXd(mass_)};
  if (es.info() != Eigen::Success) throw SolverError("bi-Laplacian prior: eigensolver did not converge");
  const Eigen::VectorXd& mu = es.eigenvalues();  // ascending
  lambda = mu.array().inverse().square();
  vectors = es.eigenvectors();
  normalize_signs(vectors);
}

OrnsteinUhlenbeckPrior::OrnsteinUhlenbeckPrior(const Mesh& mesh, const SparseMatrix& mass, double eta, double ell,
                                               Field mean)
    : Prior(mass, std::move(mean)) {
  if (!(eta > 0.0 && ell > 0.0)) throw std::invalid_argument("Ornstein-Uhlenbeck prior needs eta, ell > 0");
  const int n = mesh.num_nodes();
  cov_.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double dx = mesh.nodes[i].x - mesh.nodes[j].x;
      const double dy = mesh.nodes[i].y - mesh.nodes[j].y;
      cov_(i, j) = eta * eta * std::exp(-std::sqrt(dx * dx + dy * dy) / ell);
    }
  }
  cov_llt_.compute(cov_);
  if (cov_llt_.info() != Eigen::Success) {
    throw SolverError("Ornstein-Uhlenbeck prior: covariance matrix is not numerically positive definite");
  }
}

Field OrnsteinUhlenbeckPrior::apply(const Field& a) const { return cov_ * (mass_ * a); }

Field OrnsteinUhlenbeckPrior::apply_inv(const Field& a) const { return solve_mass(cov_llt_.solve(a)); }

Eigen::MatrixXd OrnsteinUhlenbeckPrior::dense_inverse() const {
  const Eigen::MatrixXd cinv = cov_llt_.solve(Eigen::MatrixXd::Identity(size(), size()));
  return mass_solver_.solve(cinv);
}

void OrnsteinUhlenbeckPrior::full_eigensystem(Eigen::VectorXd& lambda, Eigen::MatrixXd& vectors) const {
  // C M e = lambda e  <=>  (L^T C L) y = lambda y with M = L L^T, e = L^-T y
  Eigen::LLT<Eigen::MatrixXd> mllt{Eigen::MatrixXd(mass_)};
  if (mllt.info() != Eigen::Success) throw SolverError("Ornstein-Uhlenbeck prior: mass factorization failed");
  const Eigen::MatrixXd l = mllt.matrixL();
  const Eigen::MatrixXd sym = l.transpose() * cov_ * l;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw SolverError("Ornstein-Uhlenbeck prior: eigensolver did not converge");
  lambda = es.eigenvalues().reverse();
  const Eigen::MatrixXd y = es.eigenvectors().rowwise().reverse();
  vectors = mllt.matrixU().solve(y);
  normalize_signs(vectors);
}

std::unique_ptr<Prior> make_prior(const PriorSpec& spec, const Mesh& mesh, const FemMatrices& fem) {
  spec.validate();
  if (spec.kind == PriorKind::BiLaplacian) {
    return std::make_unique<BiLaplacianPrior>(fem, spec.gamma, spec.delta, spec.mean);
  }
  return std::make_unique<OrnsteinUhlenbeckPrior>(mesh, fem.mass, spec.eta, spec.ell, spec.mean);
}

Field sample_prior(const ProjectionBasis& basis, const Field& mean, std::uint64_t seed) {
  if (basis.rank() < 1) throw std::invalid_argument("sample_prior: basis rank must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Field out = mean.size() == 0 ? Field::Zero(basis.vectors.rows()) : mean;
  for (int k = 0; k < basis.rank(); ++k) out += std::sqrt(basis.lambda[k]) * normal(rng) * basis.vectors.col(k);
  return out;
}

}  // namespace fracpat
