#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "fracpat/fracwave.hpp"
#include "fracpat/priors.hpp"

namespace fracpat {

/// G[k][l]_{jm} = <W_{psi_k} e_j, W_{psi_l} e_m>_obs with psi_k = sin(k omega t)
/// at unit amplitude. Only the eigenvalues of the basis are kept.
struct MisfitGram {
  int K = 0;
  int N = 0;
  double omega = 0.0;
  double T = 0.0;
  std::vector<Eigen::MatrixXd> blocks;  // K*K, row-major in (k, l)
  Eigen::VectorXd lambda;
  double full_trace = 0.0;

  [[nodiscard]] const Eigen::MatrixXd& block(int k, int l) const { return blocks[static_cast<std::size_t>(k * K + l)]; }
  [[nodiscard]] double tail_trace() const { return full_trace - lambda.sum(); }
  /// sum_{k,l} d_k d_l G[k][l]
  [[nodiscard]] Eigen::MatrixXd combine(const Eigen::VectorXd& d) const;
};

/// K*N forward solves; parallel over (k, j) when built with OpenMP, with a
/// schedule-independent result.
MisfitGram precompute_gram(const WaveSolver& solver, const ProjectionBasis& basis, int K, double omega);

/// tr[(sigma^-2 I^2 sum d_k d_l G[k][l] + diag(1/lambda))^-1] + tail
double phi_N(const Eigen::VectorXd& d, double I, const MisfitGram& gram, double sigma2);
Eigen::VectorXd grad_phi_N(const Eigen::VectorXd& d, double I, const MisfitGram& gram, double sigma2);

/// Prior inverse in an M-orthonormal basis split into the leading N x N block
/// A, the coupling B and the trailing block D.
struct BlockPrior {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd D;

  static BlockPrior split(const Eigen::MatrixXd& representation, int N);
};

/// Trace of [[H + A, B], [B^T, D]]^-1 via the Schur complement L = H + A - B D^-1 B^T.
double trace_general_projection(const Eigen::MatrixXd& H, const BlockPrior& prior);

/// sqrt(|i|^2_{L2(0,T)} + |i'|^2_{L2(0,T)}) by composite Simpson on `intervals` steps.
double h1_norm_intensity(const IntensityDesign& design, double T, int intervals);

/// |i(I, d)|^2_{H1} = I^2 (c0 + 2 b.d + d^T Q d) for the basis {1, psi_1..psi_K}.
struct H1Form {
  double c0 = 0.0;
  Eigen::VectorXd b;
  Eigen::MatrixXd Q;

  static H1Form build(int K, double omega, double T, int intervals);
  [[nodiscard]] double unit_sq(const Eigen::VectorXd& d) const { return c0 + 2.0 * b.dot(d) + d.dot(Q * d); }
  [[nodiscard]] double norm(double I, const Eigen::VectorXd& d) const { return std::abs(I) * std::sqrt(unit_sq(d)); }
};

enum class H1Policy {
  /// I fixed where the initial design meets the H1 bound; d kept inside the
  /// ell1 ball and the H1 ellipsoid
  Ball,
  /// I capped for the worst design in the ell1 ball; d kept inside the ball
  WorstCaseCap,
};

H1Policy parse_h1_policy(const std::string& name);
std::string to_string(H1Policy policy);

struct DesignConstraints {
  double l1_bound = 1.0;
  double h1_bound = 0.0;
  H1Policy policy = H1Policy::Ball;
  H1Form form;

  /// h1_bound = factor * |i0|_{H1} for i0 = I0 (1 + sin(omega t))
  static DesignConstraints make(int K, double omega, double T, int intervals, double I0, double factor,
                                H1Policy policy);
  /// amplitude used by the optimizer for starting design d0
  [[nodiscard]] double amplitude(const Eigen::VectorXd& d0) const;
  [[nodiscard]] bool feasible(const Eigen::VectorXd& d, double I, double slack = 1e-9) const;
  /// Euclidean projection onto the admissible set for amplitude I
  [[nodiscard]] Eigen::VectorXd project(const Eigen::VectorXd& d, double I) const;
};

/// Euclidean projection onto {|x|_1 <= radius}.
Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& y, double radius);

/// Euclidean projection onto {c0 + 2 b.x + x^T Q x <= level}; Q SPD.
Eigen::VectorXd project_ellipsoid(const Eigen::VectorXd& y, const H1Form& form, double level);

struct OptimizerOptions {
  double step = 1.0;
  double shrink = 0.5;
  double c1 = 1e-4;
  double tol = 1e-6;
  int maxit = 500;
  int max_backtracks = 60;
};

struct OptimizerRecord {
  int iter = 0;
  double phi = 0.0;
  double l1 = 0.0;
  double step = 0.0;
};

struct DesignResult {
  Eigen::VectorXd d;
  double I = 0.0;
  double phi0 = 0.0;
  double phi = 0.0;
  double pg_norm = 0.0;
  bool converged = false;
  bool line_search_failed = false;
  std::vector<OptimizerRecord> history;
};

DesignResult optimize_design(const MisfitGram& gram, const DesignConstraints& constraints, const Eigen::VectorXd& d0,
                             double sigma2, const OptimizerOptions& opts = {});

struct GramManifest {
  int nx = 0;
  int nt = 0;
  double alpha = 0.0;
  double b = 0.0;
  double c = 0.0;
  std::string prior;
};

/// Writes manifest.json plus one CSV per block and lambda.csv into `dir`.
void save_gram(const MisfitGram& gram, const GramManifest& meta, const std::string& dir);
/// Reads a Gram written by save_gram; verifies the checksum.
MisfitGram load_gram(const std::string& manifest_path, GramManifest* meta = nullptr);

}  // namespace fracpat
