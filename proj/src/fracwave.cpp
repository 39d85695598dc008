#include "fracpat/fracwave.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace fracpat {

namespace {

// average-acceleration Newmark
constexpr double kBeta = 0.25;

}  // namespace

FracParams FracParams::from_attenuation(double alpha, double r0, double c) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  FracParams p;
  p.alpha = alpha;
  p.c = c;
  p.b = -2.0 * c * r0 / std::cos(std::numbers::pi * (alpha + 1.0) / 2.0);
  p.validate();
  return p;
}

void FracParams::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  if (!(c > 0.0)) throw std::invalid_argument("sound speed c must be positive");
  if (!(b >= 0.0)) throw std::invalid_argument("damping b must be nonnegative");
}

Eigen::VectorXd caputo_weights(double alpha, double dt, int nt) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("caputo_weights: alpha must lie in (0,1)");
  if (!(dt > 0.0)) throw std::invalid_argument("caputo_weights: dt must be positive");
  const double scale = std::pow(dt, -alpha) / std::tgamma(2.0 - alpha);
  Eigen::VectorXd w(nt);
  for (int j = 0; j < nt; ++j) {
    w[j] = scale * (std::pow(j + 1.0, 1.0 - alpha) - std::pow(static_cast<double>(j), 1.0 - alpha));
  }
  return w;
}

Eigen::VectorXd l1_caputo_derivative(const Eigen::VectorXd& u, const Eigen::VectorXd& weights) {
  const Eigen::Index n = u.size();
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  for (Eigen::Index m = 1; m < n; ++m) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) acc += weights[j] * (u[m - j] - u[m - j - 1]);
    d[m] = acc;
  }
  return d;
}

TimeGrid TimeGrid::make(double T, int nt, double alpha) {
  TimeGrid g;
  g.T = T;
  g.nt = nt;
  g.simpson = simpson_weights(nt, T);
  g.dt = T / nt;
  g.caputo = caputo_weights(alpha, g.dt, nt);
  return g;
}

double IntensityDesign::value(double t) const {
  double s = 1.0;
  for (std::size_t k = 0; k < coeffs.size(); ++k) s += coeffs[k] * std::sin((k + 1.0) * omega * t);
  return amplitude * s;
}

double IntensityDesign::rate(double t) const {
  double s = 0.0;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    const double kw = (k + 1.0) * omega;
    s += coeffs[k] * kw * std::cos(kw * t);
  }
  return amplitude * s;
}

Eigen::VectorXd IntensityDesign::rate_samples(const TimeGrid& grid) const {
  Eigen::VectorXd r(grid.nt + 1);
  for (int m = 0; m <= grid.nt; ++m) r[m] = rate(grid.time(m));
  return r;
}

double IntensityDesign::l1_norm() const {
  double s = 0.0;
  for (double d : coeffs) s += std::abs(d);
  return s;
}

IntensityDesign IntensityDesign::mode(int k, int num_modes, double omega) {
  if (k < 1 || k > num_modes) throw std::invalid_argument("IntensityDesign::mode: k out of range");
  IntensityDesign d;
  d.amplitude = 1.0;
  d.coeffs.assign(num_modes, 0.0);
  d.coeffs[k - 1] = 1.0;
  d.omega = omega;
  return d;
}

ObservationSeries smooth_in_time(const ObservationSeries& g) {
  ObservationSeries out = g;
  const Eigen::Index n = g.values.rows();
  for (Eigen::Index m = 1; m + 1 < n; ++m) {
    out.values.row(m) = (g.values.row(m - 1) + g.values.row(m) + g.values.row(m + 1)) / 3.0;
  }
  return out;
}

WaveSolver::WaveSolver(const Mesh& mesh, const FemMatrices& fem, FracParams params, TimeGrid grid)
    : mesh_(mesh), fem_(fem), params_(params), grid_(std::move(grid)) {
  params_.validate();
  if (grid_.nt < 2 || grid_.nt % 2 != 0) throw std::invalid_argument("WaveSolver: nt must be even");
  if (fem_.simpson.size() != grid_.nt + 1) {
    throw std::invalid_argument("WaveSolver: FEM quadrature does not match the time grid");
  }
  obs_interior_.reserve(mesh_.obs_nodes.size());
  for (int id : mesh_.obs_nodes) {
    const int k = mesh_.interior_index[id];
    if (k < 0) throw std::logic_error("WaveSolver: observation node on the Dirichlet boundary");
    obs_interior_.push_back(k);
  }

  const double dt = grid_.dt;
  const double w0 = grid_.caputo[0];
  SparseMatrix step = (1.0 / (params_.c * params_.c)) * fem_.mass_ii +
                      (kBeta * dt * dt * (1.0 + params_.b * w0)) * fem_.stiffness_ii;
  step_solver_.compute(step);
  if (step_solver_.info() != Eigen::Success) throw SolverError("WaveSolver: step matrix factorization failed");
  mass_solver_.compute(fem_.mass_ii);
  if (mass_solver_.info() != Eigen::Success) throw SolverError("WaveSolver: mass matrix factorization failed");

  reversed_caputo_ = grid_.caputo.reverse();
}

void WaveSolver::check_field(const Field& a) const {
  if (a.size() != mesh_.num_nodes()) throw std::invalid_argument("field size does not match the mesh");
}

void WaveSolver::check_series(const ObservationSeries& g) const {
  if (g.values.rows() != grid_.nt + 1 || g.values.cols() != mesh_.num_obs()) {
    throw std::invalid_argument("observation series does not match the time grid / observation loop");
  }
}

WaveTrajectory WaveSolver::integrate(const LoadFn& load, TrajectoryStorage storage) const {
  const int ni = mesh_.num_interior();
  const int nt = grid_.nt;
  const double dt = grid_.dt;
  const double b = params_.b;
  const double w0 = grid_.caputo[0];
  const double c2 = params_.c * params_.c;
  const bool keep_u = storage != TrajectoryStorage::ObsOnly;
  const bool keep_v = storage == TrajectoryStorage::DisplacementAndVelocity;

  WaveTrajectory out;
  out.obs.values.setZero(nt + 1, mesh_.num_obs());
  if (keep_u) out.displacement.setZero(mesh_.num_nodes(), nt + 1);
  if (keep_v) out.velocity.setZero(mesh_.num_nodes(), nt + 1);

  Eigen::VectorXd u = Eigen::VectorXd::Zero(ni);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(ni);
  Eigen::VectorXd f(ni), acc(ni), pred(ni), tmp(ni), acc_new(ni), u_new(ni);
  Eigen::MatrixXd increments;
  if (b > 0.0) increments.resize(ni, nt);

  auto record = [&](int m) {
    for (int k = 0; k < mesh_.num_obs(); ++k) out.obs.values(m, k) = u[obs_interior_[k]];
    if (keep_u) {
      for (int k = 0; k < ni; ++k) out.displacement(mesh_.interior_nodes[k], m) = u[k];
    }
    if (keep_v) {
      for (int k = 0; k < ni; ++k) out.velocity(mesh_.interior_nodes[k], m) = v[k];
    }
  };

  f.setZero();
  load(0, f);
  acc = c2 * mass_solver_.solve(f);
  record(0);

  for (int m = 0; m < nt; ++m) {
    pred = u + dt * v + (dt * dt * (0.5 - kBeta)) * acc;
    tmp = (1.0 + b * w0) * pred - (b * w0) * u;
    if (b > 0.0 && m > 0) {
      tmp.noalias() += b * (increments.leftCols(m) * reversed_caputo_.segment(nt - 1 - m, m));
    }
    f.setZero();
    load(m + 1, f);
    f.noalias() -= fem_.stiffness_ii * tmp;
    acc_new = step_solver_.solve(f);
    u_new = pred + (kBeta * dt * dt) * acc_new;
    v += (0.5 * dt) * (acc + acc_new);
    if (b > 0.0) increments.col(m) = u_new - u;
    u.swap(u_new);
    acc.swap(acc_new);
    if (!u.allFinite()) throw SolverError("wave solver produced non-finite values", m + 1);
    record(m + 1);
  }
  return out;
}

Eigen::MatrixXd WaveSolver::integrate_transpose(const LoadFn& sensitivity) const {
  const int ni = mesh_.num_interior();
  const int nt = grid_.nt;
  const double dt = grid_.dt;
  const double b = params_.b;
  const double w0 = grid_.caputo[0];
  const double c2 = params_.c * params_.c;

  Eigen::MatrixXd load_bar = Eigen::MatrixXd::Zero(ni, nt + 1);
  // K r_bar of each reversed step; the history term of step m' is -b K r_bar_m'
  Eigen::MatrixXd k_rbar;
  if (b > 0.0) k_rbar.setZero(ni, nt);

  // adjoints of u^{m+1}, v^{m+1}, acc^{m+1} while reversing step m
  Eigen::VectorXd ubar = Eigen::VectorXd::Zero(ni);
  Eigen::VectorXd vbar = Eigen::VectorXd::Zero(ni);
  Eigen::VectorXd abar = Eigen::VectorXd::Zero(ni);
  Eigen::VectorXd ubar_m(ni), vbar_m(ni), abar_m(ni), predbar(ni), rbar(ni), kr(ni), h(ni), dbar(ni);

  h.setZero();
  sensitivity(nt, h);
  ubar = h;

  for (int m = nt - 1; m >= 0; --m) {
    ubar_m.setZero();
    // increment delta^{m+1} = u^{m+1} - u^m feeds the history of steps m+1..nt-1
    const int later = nt - 1 - m;
    if (b > 0.0 && later > 0) {
      dbar.noalias() = (-b) * (k_rbar.middleCols(m + 1, later) * grid_.caputo.segment(1, later));
      ubar += dbar;
      ubar_m -= dbar;
    }
    // v^{m+1} = v^m + dt/2 (acc^m + acc^{m+1})
    vbar_m = vbar;
    abar_m = (0.5 * dt) * vbar;
    abar += (0.5 * dt) * vbar;
    // u^{m+1} = pred + beta dt^2 acc^{m+1}
    predbar = ubar;
    abar += (kBeta * dt * dt) * ubar;
    // acc^{m+1} = S^{-1} (load^{m+1} - K [(1 + b w0) pred - b w0 u^m + b H_m])
    rbar = step_solver_.solve(abar);
    load_bar.col(m + 1) = rbar;
    kr.noalias() = fem_.stiffness_ii * rbar;
    predbar -= (1.0 + b * w0) * kr;
    ubar_m += (b * w0) * kr;
    if (b > 0.0) k_rbar.col(m) = kr;
    // pred = u^m + dt v^m + dt^2 (1/2 - beta) acc^m
    ubar_m += predbar;
    vbar_m += dt * predbar;
    abar_m += (dt * dt * (0.5 - kBeta)) * predbar;

    h.setZero();
    sensitivity(m, h);
    ubar_m += h;

    ubar.swap(ubar_m);
    vbar.swap(vbar_m);
    abar.swap(abar_m);
    if (!ubar.allFinite()) throw SolverError("transpose sweep produced non-finite values", m);
  }
  // acc^0 = c^2 M^{-1} load^0
  load_bar.col(0) = c2 * mass_solver_.solve(abar);
  return load_bar;
}

WaveTrajectory WaveSolver::solve_forward(const Field& a, const Eigen::VectorXd& source_rate,
                                         TrajectoryStorage storage) const {
  check_field(a);
  if (source_rate.size() != grid_.nt + 1) throw std::invalid_argument("source rate length must be nt+1");
  const Eigen::VectorXd ma = fem_.mass * a;
  Eigen::VectorXd ma_int(mesh_.num_interior());
  for (int k = 0; k < mesh_.num_interior(); ++k) ma_int[k] = ma[mesh_.interior_nodes[k]];
  return integrate([&](int m, Eigen::Ref<Eigen::VectorXd> f) { f = source_rate[m] * ma_int; }, storage);
}

WaveTrajectory WaveSolver::solve_forward(const Field& a, const IntensityDesign& design,
                                         TrajectoryStorage storage) const {
  return solve_forward(a, design.rate_samples(grid_), storage);
}

WaveTrajectory WaveSolver::solve_adjoint(const ObservationSeries& g, TrajectoryStorage storage) const {
  check_series(g);
  const int nt = grid_.nt;
  const int no = mesh_.num_obs();
  // time-flipped state ubar(t) = q(T - t) solves the forward equation with
  // load B g(T - t) on the observation loop
  Eigen::VectorXd bg(no);
  auto load = [&](int m, Eigen::Ref<Eigen::VectorXd> f) {
    bg.noalias() = fem_.obs_mass * g.values.row(nt - m).transpose();
    for (int k = 0; k < no; ++k) f[obs_interior_[k]] += bg[k];
  };
  const TrajectoryStorage inner =
      storage == TrajectoryStorage::ObsOnly ? TrajectoryStorage::Displacement : storage;
  WaveTrajectory flipped = integrate(load, inner);

  WaveTrajectory q;
  q.obs.values = flipped.obs.values.colwise().reverse();
  if (storage != TrajectoryStorage::ObsOnly) q.displacement = flipped.displacement.rowwise().reverse();
  if (storage == TrajectoryStorage::DisplacementAndVelocity) {
    q.velocity = -flipped.velocity.rowwise().reverse();
  }
  if (storage == TrajectoryStorage::ObsOnly) {
    // displacement was only needed internally
    q.displacement.resize(0, 0);
  }
  return q;
}

ObservationSeries WaveSolver::apply_W(const Field& a, const Eigen::VectorXd& source_rate) const {
  return solve_forward(a, source_rate, TrajectoryStorage::ObsOnly).obs;
}

ObservationSeries WaveSolver::apply_W(const Field& a, const IntensityDesign& design) const {
  return apply_W(a, design.rate_samples(grid_));
}

Field WaveSolver::apply_Wstar(const ObservationSeries& g, const Eigen::VectorXd& source_rate,
                              AdjointMode mode) const {
  check_series(g);
  if (source_rate.size() != grid_.nt + 1) throw std::invalid_argument("source rate length must be nt+1");
  const int nt = grid_.nt;
  Field out = Field::Zero(mesh_.num_nodes());

  if (mode == AdjointMode::Continuous) {
    const WaveTrajectory q = solve_adjoint(g, TrajectoryStorage::Displacement);
    for (int m = 0; m <= nt; ++m) {
      const double wm = grid_.simpson[m] * source_rate[m];
      if (wm != 0.0) out += wm * q.displacement.col(m);
    }
    return out;
  }

  const int no = mesh_.num_obs();
  Eigen::VectorXd bg(no);
  auto sens = [&](int m, Eigen::Ref<Eigen::VectorXd> h) {
    bg.noalias() = fem_.obs_mass * g.values.row(m).transpose();
    bg *= grid_.simpson[m];
    for (int k = 0; k < no; ++k) h[obs_interior_[k]] += bg[k];
  };
  const Eigen::MatrixXd load_bar = integrate_transpose(sens);
  const Eigen::VectorXd folded = load_bar * source_rate;
  // the load of node k is (M a)_k i'(t), so W^T g = M^{-1} M_{:,I} folded,
  // which is folded extended by zero on the boundary
  for (int k = 0; k < mesh_.num_interior(); ++k) out[mesh_.interior_nodes[k]] = folded[k];
  return out;
}

Field WaveSolver::apply_Wstar(const ObservationSeries& g, const IntensityDesign& design, AdjointMode mode) const {
  return apply_Wstar(g, design.rate_samples(grid_), mode);
}

double WaveSolver::obs_inner(const ObservationSeries& g, const ObservationSeries& h) const {
  check_series(g);
  check_series(h);
  double s = 0.0;
  for (int m = 0; m <= grid_.nt; ++m) {
    s += grid_.simpson[m] * g.values.row(m).dot(fem_.obs_mass * h.values.row(m).transpose());
  }
  return s;
}

double WaveSolver::obs_norm(const ObservationSeries& g) const { return std::sqrt(std::max(0.0, obs_inner(g, g))); }

double WaveSolver::mass_inner(const Field& a, const Field& b) const { return a.dot(fem_.mass * b); }

double WaveSolver::mass_norm(const Field& a) const { return std::sqrt(std::max(0.0, mass_inner(a, a))); }

double WaveSolver::energy(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
  return 0.5 / (params_.c * params_.c) * v.dot(fem_.mass * v) + 0.5 * u.dot(fem_.stiffness * u);
}

ObservationSeries WaveSolver::zero_series() const {
  ObservationSeries g;
  g.values.setZero(grid_.nt + 1, mesh_.num_obs());
  return g;
}

}  // namespace fracpat
