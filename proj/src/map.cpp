#include "fracpat/map.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace fracpat {

void InverseProblemSetup::validate(const WaveSolver& solver) const {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("noise variance sigma2 must be positive");
  if (p_obs.values.rows() != solver.grid().nt + 1 || p_obs.values.cols() != solver.num_obs()) {
    throw std::invalid_argument("observation series does not match the solver grid");
  }
  if (!(options.cg_rtol > 0.0) || options.cg_maxit < 1) throw std::invalid_argument("invalid CG settings");
}

ObservationSeries add_noise(const ObservationSeries& obs, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("noise standard deviation must be nonnegative");
  ObservationSeries out = obs;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  // row-major traversal so the draw order is time-major
  for (Eigen::Index m = 0; m < out.values.rows(); ++m) {
    for (Eigen::Index k = 0; k < out.values.cols(); ++k) out.values(m, k) += normal(rng);
  }
  return out;
}

Field apply_posterior_hessian(const WaveSolver& solver, const Prior& prior, const IntensityDesign& design,
                              double sigma2, const Field& v, AdjointMode mode) {
  const Eigen::VectorXd rate = design.rate_samples(solver.grid());
  return solver.apply_Wstar(solver.apply_W(v, rate), rate, mode) / sigma2 + prior.apply_inv(v);
}

MapResult map_estimate(const WaveSolver& solver, const Prior& prior, const InverseProblemSetup& setup) {
  setup.validate(solver);
  const double inv_s2 = 1.0 / setup.sigma2;
  const Eigen::VectorXd rate = setup.design.rate_samples(solver.grid());
  const AdjointMode mode = setup.options.adjoint;
  auto minner = [&](const Field& u, const Field& v) { return solver.mass_inner(u, v); };
  auto obs_sub = [](const ObservationSeries& a, const ObservationSeries& b) {
    ObservationSeries d;
    d.values = a.values - b.values;
    return d;
  };

  MapResult res;
  Field x = prior.mean();
  // misfit W x - p and Gamma^-1 (x - a0) are carried along the iteration
  ObservationSeries misfit = obs_sub(solver.apply_W(x, rate), setup.p_obs);
  Field reg = Field::Zero(x.size());
  auto objective = [&]() { return 0.5 * inv_s2 * std::pow(solver.obs_norm(misfit), 2) + 0.5 * minner(x - prior.mean(), reg); };

  Field r = -inv_s2 * solver.apply_Wstar(misfit, rate, mode);
  Field z = prior.apply(r);
  Field p = z;
  Field p_inv = r;  // Gamma^-1 p
  double rz = minner(r, z);
  const double rz0 = rz;
  res.stats.objective.push_back(objective());
  res.stats.residual_history.push_back(rz0 > 0.0 ? 1.0 : 0.0);
  if (!(rz0 > 0.0)) {
    res.a_map = x;
    res.stats.converged = true;
    return res;
  }

  for (int it = 1; it <= setup.options.cg_maxit; ++it) {
    const ObservationSeries wp = solver.apply_W(p, rate);
    const Field hp = inv_s2 * solver.apply_Wstar(wp, rate, mode) + p_inv;
    const double php = minner(p, hp);
    if (!(php > 0.0)) throw SolverError("map_estimate: normal operator is not positive definite", it);
    const double step = rz / php;
    x += step * p;
    misfit.values += step * wp.values;
    reg += step * p_inv;
    r -= step * hp;
    z = prior.apply(r);
    const double rz_new = minner(r, z);
    res.stats.iterations = it;
    res.stats.residual = std::sqrt(std::max(0.0, rz_new) / rz0);
    res.stats.residual_history.push_back(res.stats.residual);
    res.stats.objective.push_back(objective());
    if (res.stats.residual <= setup.options.cg_rtol) {
      res.stats.converged = true;
      break;
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    p = z + beta * p;
    p_inv = r + beta * p_inv;
  }
  res.a_map = x;
  return res;
}

double rel_error(const Field& a, const Field& a_true, const SparseMatrix& mass) {
  if (a.size() != a_true.size() || a.size() != mass.rows()) throw std::invalid_argument("rel_error: size mismatch");
  const double den = a_true.dot(mass * a_true);
  if (!(den > 0.0)) throw std::invalid_argument("rel_error: reference field is zero");
  const Field d = a - a_true;
  return std::sqrt(d.dot(mass * d) / den);
}

}  // namespace fracpat
