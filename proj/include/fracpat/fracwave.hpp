#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracpat/fem.hpp"
#include "fracpat/mesh.hpp"

namespace fracpat {

/// Nodal coefficient vector on all mesh nodes; compared in the M inner product.
using Field = Eigen::VectorXd;

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, int step = -1) : std::runtime_error(what), step_(step) {}
  [[nodiscard]] int step() const { return step_; }

 private:
  int step_;
};

struct FracParams {
  double alpha = 0.3;
  double b = 0.0;  // damping coefficient
  double c = 300.0;

  /// b = -2 c r0 / cos(pi (alpha + 1) / 2), the power-law attenuation fit.
  static FracParams from_attenuation(double alpha, double r0, double c);
  void validate() const;
};

/// L1 weights w_j = dt^-alpha / Gamma(2-alpha) ((j+1)^(1-alpha) - j^(1-alpha)),
/// j = 0..nt-1. D^alpha u(t_m) ~ sum_j w_j (u^{m-j} - u^{m-j-1}).
Eigen::VectorXd caputo_weights(double alpha, double dt, int nt);

/// Applies the L1 quadrature to samples u_0..u_nt; entry m approximates
/// D^alpha u(t_m) (entry 0 is zero).
Eigen::VectorXd l1_caputo_derivative(const Eigen::VectorXd& u, const Eigen::VectorXd& weights);

struct TimeGrid {
  double T = 0.0;
  int nt = 0;
  double dt = 0.0;
  Eigen::VectorXd caputo;   // length nt
  Eigen::VectorXd simpson;  // length nt+1

  static TimeGrid make(double T, int nt, double alpha);
  [[nodiscard]] double time(int m) const { return m * dt; }
};

/// i(t) = I [1 + sum_k d_k sin(k omega t)].
struct IntensityDesign {
  double amplitude = 100.0;
  std::vector<double> coeffs{1.0};
  double omega = 0.0;

  [[nodiscard]] double value(double t) const;
  /// i'(t) = I sum_k d_k k omega cos(k omega t)
  [[nodiscard]] double rate(double t) const;
  [[nodiscard]] Eigen::VectorXd rate_samples(const TimeGrid& grid) const;
  [[nodiscard]] double l1_norm() const;

  /// Unit-amplitude single mode sin(k omega t), k >= 1.
  static IntensityDesign mode(int k, int num_modes, double omega);
};

/// Pressure traces on the observation loop, one row per time step.
struct ObservationSeries {
  Eigen::MatrixXd values;  // (nt+1) x num_obs

  [[nodiscard]] int steps() const { return static_cast<int>(values.rows()) - 1; }
};

/// Optional moving-average smoothing of raw data in time before applying W*.
ObservationSeries smooth_in_time(const ObservationSeries& g);

enum class TrajectoryStorage { ObsOnly, Displacement, DisplacementAndVelocity };

struct WaveTrajectory {
  ObservationSeries obs;
  Eigen::MatrixXd displacement;  // num_nodes x (nt+1), empty for ObsOnly
  Eigen::MatrixXd velocity;      // num_nodes x (nt+1), only when requested
};

enum class AdjointMode {
  /// time-flipped adjoint wave equation, Simpson quadrature of q i'
  Continuous,
  /// reverse sweep of the time stepper; exact transpose of apply_W
  Transpose,
};

/// Solver context for the fractionally damped wave equation
///   c^-2 M u'' + K u + b K D^alpha u = load,  u(0) = u'(0) = 0,
/// on interior nodes, stepped with average-acceleration Newmark and the L1
/// convolution for D^alpha. The step matrix is factored once.
///
/// Immutable after construction; all solve methods are const and reentrant.
class WaveSolver {
 public:
  using LoadFn = std::function<void(int step, Eigen::Ref<Eigen::VectorXd> interior_load)>;

  WaveSolver(const Mesh& mesh, const FemMatrices& fem, FracParams params, TimeGrid grid);

  [[nodiscard]] const Mesh& mesh() const { return mesh_; }
  [[nodiscard]] const FemMatrices& fem() const { return fem_; }
  [[nodiscard]] const FracParams& params() const { return params_; }
  [[nodiscard]] const TimeGrid& grid() const { return grid_; }

  /// Generic stepper; `load(m, f)` fills the interior load vector at t_m.
  [[nodiscard]] WaveTrajectory integrate(const LoadFn& load, TrajectoryStorage storage) const;

  /// Transpose of the stepper. Given the sensitivity `h(m, out)` of a linear
  /// functional J = sum_m h_m . u_m to the interior displacement at t_m,
  /// returns dJ/dload as an interior x (nt+1) matrix.
  [[nodiscard]] Eigen::MatrixXd integrate_transpose(const LoadFn& sensitivity) const;

  /// Source a(x) i'(t) with i' given as samples on the time grid.
  [[nodiscard]] WaveTrajectory solve_forward(const Field& a, const Eigen::VectorXd& source_rate,
                                             TrajectoryStorage storage = TrajectoryStorage::ObsOnly) const;
  [[nodiscard]] WaveTrajectory solve_forward(const Field& a, const IntensityDesign& design,
                                             TrajectoryStorage storage = TrajectoryStorage::ObsOnly) const;

  /// Adjoint state q(t) on all nodes (forward time order) driven by g on the
  /// observation loop; q(T) = q'(T) = 0.
  [[nodiscard]] WaveTrajectory solve_adjoint(const ObservationSeries& g,
                                             TrajectoryStorage storage = TrajectoryStorage::Displacement) const;

  [[nodiscard]] ObservationSeries apply_W(const Field& a, const IntensityDesign& design) const;
  [[nodiscard]] ObservationSeries apply_W(const Field& a, const Eigen::VectorXd& source_rate) const;
  [[nodiscard]] Field apply_Wstar(const ObservationSeries& g, const IntensityDesign& design,
                                  AdjointMode mode = AdjointMode::Continuous) const;
  [[nodiscard]] Field apply_Wstar(const ObservationSeries& g, const Eigen::VectorXd& source_rate,
                                  AdjointMode mode = AdjointMode::Continuous) const;

  /// <g, h> = sum_m w_m g_m^T B h_m
  [[nodiscard]] double obs_inner(const ObservationSeries& g, const ObservationSeries& h) const;
  [[nodiscard]] double obs_norm(const ObservationSeries& g) const;
  [[nodiscard]] double mass_inner(const Field& a, const Field& b) const;
  [[nodiscard]] double mass_norm(const Field& a) const;

  /// E = 1/2 c^-2 v^T M v + 1/2 u^T K u for full-node u, v.
  [[nodiscard]] double energy(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;

  [[nodiscard]] ObservationSeries zero_series() const;
  [[nodiscard]] int num_obs() const { return mesh_.num_obs(); }

 private:
  void check_field(const Field& a) const;
  void check_series(const ObservationSeries& g) const;

  Mesh mesh_;
  FemMatrices fem_;
  FracParams params_;
  TimeGrid grid_;
  std::vector<int> obs_interior_;  // obs node -> interior index
  Eigen::SimplicialLDLT<SparseMatrix> step_solver_;
  Eigen::SimplicialLDLT<SparseMatrix> mass_solver_;
  Eigen::VectorXd reversed_caputo_;
};

}  // namespace fracpat
