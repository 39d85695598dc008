#pragma once

#include <cstdint>
#include <vector>

#include "fracpat/fracwave.hpp"
#include "fracpat/priors.hpp"

namespace fracpat {

struct MapOptions {
  double cg_rtol = 1e-8;
  int cg_maxit = 200;
  AdjointMode adjoint = AdjointMode::Transpose;
};

struct InverseProblemSetup {
  IntensityDesign design;
  double sigma2 = 1e-2;
  ObservationSeries p_obs;
  MapOptions options;

  void validate(const WaveSolver& solver) const;
};

struct MapStats {
  int iterations = 0;
  /// preconditioned residual norm relative to the initial one
  double residual = 0.0;
  bool converged = false;
  /// Tikhonov objective at x_0, x_1, ...
  std::vector<double> objective;
  std::vector<double> residual_history;
};

struct MapResult {
  Field a_map;
  MapStats stats;
};

/// Adds i.i.d. N(0, sigma^2) to every entry; sigma = 0 returns the input.
ObservationSeries add_noise(const ObservationSeries& obs, double sigma, std::uint64_t seed);

/// Minimizer of 1/2 sigma^-2 |W a - p_obs|^2 + 1/2 |a - a0|^2_{Gamma_pr^-1}
/// by CG in the M inner product, preconditioned with Gamma_pr, from x_0 = a0.
MapResult map_estimate(const WaveSolver& solver, const Prior& prior, const InverseProblemSetup& setup);

/// (sigma^-2 W*W + Gamma_pr^-1) v
Field apply_posterior_hessian(const WaveSolver& solver, const Prior& prior, const IntensityDesign& design,
                              double sigma2, const Field& v, AdjointMode mode = AdjointMode::Transpose);

/// |a - a_true|_M / |a_true|_M
double rel_error(const Field& a, const Field& a_true, const SparseMatrix& mass);

}  // namespace fracpat
