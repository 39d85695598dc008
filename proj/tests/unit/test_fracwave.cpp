#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"

using namespace fracpat;

namespace {

constexpr double kPi = std::numbers::pi;

Field bump(const Mesh& mesh, double x0, double y0) {
  Field a(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const double dx = mesh.nodes[i].x - x0;
    const double dy = mesh.nodes[i].y - y0;
    a[i] = std::exp(-20.0 * (dx * dx + dy * dy));
  }
  return a;
}

IntensityDesign reference_design(double I = 100.0) {
  IntensityDesign d;
  d.amplitude = I;
  d.coeffs = {1.0};
  d.omega = 100.0 * kPi;
  return d;
}

ObservationSeries random_series(const WaveSolver& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  ObservationSeries g = s.zero_series();
  for (Eigen::Index i = 0; i < g.values.size(); ++i) g.values.data()[i] = nd(rng);
  return g;
}

double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

}  // namespace

TEST_CASE("L1 weights") {
  const Eigen::VectorXd w1 = caputo_weights(0.5, 1.0, 1);
  REQUIRE(w1.size() == 1);
  CHECK(w1[0] == doctest::Approx(1.0 / std::tgamma(1.5)).epsilon(1e-15));
  const Eigen::VectorXd w = caputo_weights(0.3, 1e-3, 200);
  CHECK(w[0] > 0.0);
  for (int j = 1; j < w.size(); ++j) CHECK(w[j] < w[j - 1]);
  CHECK((w.array() > 0.0).all());
  CHECK_THROWS_AS(caputo_weights(0.0, 1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(caputo_weights(1.0, 1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(caputo_weights(0.5, 0.0, 4), std::invalid_argument);
}

TEST_CASE("L1 derivative of constants and of t") {
  const double alpha = 0.5;
  Eigen::VectorXd c = Eigen::VectorXd::Constant(41, 3.0);
  CHECK(l1_caputo_derivative(c, caputo_weights(alpha, 0.025, 40)).cwiseAbs().maxCoeff() == 0.0);
  double prev = 1e300;
  for (int nt : {10, 20, 40, 80}) {
    const double dt = 1.0 / nt;
    Eigen::VectorXd u(nt + 1);
    for (int m = 0; m <= nt; ++m) u[m] = m * dt;
    const Eigen::VectorXd d = l1_caputo_derivative(u, caputo_weights(alpha, dt, nt));
    const double err = std::abs(d[nt] - 1.0 / std::tgamma(2.0 - alpha));
    CHECK(err < 1e-12);
    CHECK(err <= prev + 1e-15);
    prev = err;
  }
  // t^2: D^a t^2 = 2 t^(2-a) / Gamma(3-a), first-order-plus convergence
  prev = 1e300;
  for (int nt : {10, 20, 40, 80}) {
    const double dt = 1.0 / nt;
    Eigen::VectorXd u(nt + 1);
    for (int m = 0; m <= nt; ++m) u[m] = std::pow(m * dt, 2);
    const Eigen::VectorXd d = l1_caputo_derivative(u, caputo_weights(alpha, dt, nt));
    const double err = std::abs(d[nt] - 2.0 / std::tgamma(3.0 - alpha));
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 5e-3);
}

TEST_CASE("damping coefficient from attenuation") {
  const FracParams p = FracParams::from_attenuation(0.3, 1e-4, 300.0);
  CHECK(p.b == doctest::Approx(-2.0 * 300.0 * 1e-4 / std::cos(kPi * 1.3 / 2.0)).epsilon(1e-15));
  CHECK(p.b == doctest::Approx(0.13216).epsilon(1e-4));
  CHECK(FracParams::from_attenuation(0.8, 1e-4, 300.0).b > 0.0);
  CHECK_THROWS_AS((FracParams{0.0, 0.1, 300.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((FracParams{1.0, 0.1, 300.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((FracParams{0.5, -0.1, 300.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((FracParams{0.5, 0.1, 0.0}.validate()), std::invalid_argument);
}

TEST_CASE("intensity design") {
  IntensityDesign d = reference_design();
  d.coeffs = {0.5, -0.25};
  const double t = 0.0137;
  const double w = d.omega;
  CHECK(d.value(t) == doctest::Approx(100.0 * (1.0 + 0.5 * std::sin(w * t) - 0.25 * std::sin(2 * w * t))));
  CHECK(d.rate(t) == doctest::Approx(100.0 * (0.5 * w * std::cos(w * t) - 0.25 * 2 * w * std::cos(2 * w * t))));
  CHECK(d.l1_norm() == 0.75);
  // |d|_1 <= 1 keeps i nonnegative
  for (int m = 0; m <= 1000; ++m) CHECK(d.value(0.2 * m / 1000) >= 0.0);
  CHECK_THROWS_AS(IntensityDesign::mode(0, 3, w), std::invalid_argument);
  CHECK_THROWS_AS(IntensityDesign::mode(4, 3, w), std::invalid_argument);
}

TEST_CASE("zero source gives zero data") {
  oracle::Setup s(10, 100);
  const Field zero = Field::Zero(s.mesh.num_nodes());
  CHECK(s.solver->apply_W(zero, reference_design()).values.cwiseAbs().maxCoeff() == 0.0);
  IntensityDesign flat = reference_design();
  flat.coeffs = {0.0};
  CHECK(s.solver->apply_W(bump(s.mesh, 0, 0), flat).values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linearity in the field, the amplitude and the design") {
  oracle::Setup s(10, 100);
  const Field a1 = bump(s.mesh, 0.2, 0.1);
  const Field a2 = bump(s.mesh, -0.3, 0.0);
  const IntensityDesign des = reference_design();
  const auto w1 = s.solver->apply_W(a1, des).values;
  const auto w2 = s.solver->apply_W(a2, des).values;
  const auto w12 = s.solver->apply_W(a1 + a2, des).values;
  CHECK(rel_diff(w12, w1 + w2) < 1e-10);

  const auto w_double = s.solver->apply_W(a1, reference_design(200.0)).values;
  CHECK((w_double - 2.0 * w1).cwiseAbs().maxCoeff() == 0.0);

  IntensityDesign mix = reference_design(37.0);
  mix.coeffs = {0.3, -0.2, 0.1, 0.25, -0.15};
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(w1.rows(), w1.cols());
  for (int k = 1; k <= 5; ++k) {
    sum += 37.0 * mix.coeffs[k - 1] * s.solver->apply_W(a1, IntensityDesign::mode(k, 5, mix.omega)).values;
  }
  CHECK(rel_diff(s.solver->apply_W(a1, mix).values, sum) < 1e-10);
}

TEST_CASE("causality") {
  oracle::Setup s(10, 100);
  const int off = 40;
  Eigen::VectorXd rate = Eigen::VectorXd::Zero(101);
  for (int m = off + 1; m <= 100; ++m) rate[m] = std::sin(0.3 * (m - off));
  const WaveTrajectory tr = s.solver->solve_forward(bump(s.mesh, 0.1, 0.1), rate, TrajectoryStorage::Displacement);
  CHECK(tr.displacement.leftCols(off + 1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(tr.displacement.rightCols(10).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("adjoint terminal conditions and trivial cases") {
  oracle::Setup s(10, 100);
  const WaveTrajectory q0 = s.solver->solve_adjoint(s.solver->zero_series());
  CHECK(q0.displacement.cwiseAbs().maxCoeff() == 0.0);

  const WaveTrajectory q = s.solver->solve_adjoint(random_series(*s.solver, 5), TrajectoryStorage::DisplacementAndVelocity);
  const double scale = q.displacement.cwiseAbs().maxCoeff();
  REQUIRE(scale > 0.0);
  CHECK(q.displacement.col(100).cwiseAbs().maxCoeff() <= 1e-14 * scale);
  CHECK(q.velocity.col(100).cwiseAbs().maxCoeff() <= 1e-14 * q.velocity.cwiseAbs().maxCoeff());

  ObservationSeries last = s.solver->zero_series();
  last.values.row(100).setOnes();
  CHECK(s.solver->solve_adjoint(last).displacement.col(100).cwiseAbs().maxCoeff() == 0.0);

  for (AdjointMode mode : {AdjointMode::Continuous, AdjointMode::Transpose}) {
    CHECK(s.solver->apply_Wstar(s.solver->zero_series(), reference_design(), mode).cwiseAbs().maxCoeff() == 0.0);
    IntensityDesign flat = reference_design();
    flat.coeffs = {0.0};
    CHECK(s.solver->apply_Wstar(random_series(*s.solver, 6), flat, mode).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("transpose adjoint is exact; continuous adjoint mismatch is small") {
  oracle::Setup s(10, 100);
  const Field a = bump(s.mesh, 0.1, -0.2);
  const ObservationSeries g = random_series(*s.solver, 11);
  const IntensityDesign des = reference_design();
  const ObservationSeries wa = s.solver->apply_W(a, des);
  const double lhs = s.solver->obs_inner(wa, g);
  const double denom = s.solver->obs_norm(wa) * s.solver->obs_norm(g);
  const double exact = s.solver->mass_inner(a, s.solver->apply_Wstar(g, des, AdjointMode::Transpose));
  CHECK(std::abs(lhs - exact) / denom < 1e-12);
  const double cont = s.solver->mass_inner(a, s.solver->apply_Wstar(g, des, AdjointMode::Continuous));
  CHECK(std::abs(lhs - cont) / denom < 5e-2);
}

TEST_CASE("observation inner product") {
  oracle::Setup s(10, 100);
  const ObservationSeries g = random_series(*s.solver, 1);
  const ObservationSeries h = random_series(*s.solver, 2);
  CHECK(s.solver->obs_inner(g, h) == doctest::Approx(s.solver->obs_inner(h, g)).epsilon(1e-14));
  CHECK(s.solver->obs_inner(g, g) > 0.0);
  CHECK(s.solver->obs_norm(s.solver->zero_series()) == 0.0);
  ObservationSeries bad;
  bad.values.setZero(5, 3);
  CHECK_THROWS_AS((void)s.solver->obs_inner(bad, g), std::invalid_argument);
}

TEST_CASE("temporal smoothing keeps constants and linear ramps") {
  ObservationSeries g;
  g.values.resize(11, 2);
  for (int m = 0; m <= 10; ++m) g.values.row(m) << 4.0, 0.5 * m;
  const ObservationSeries f = smooth_in_time(g);
  CHECK((f.values - g.values).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("non-finite input is reported with the step") {
  oracle::Setup s(10, 20);
  Field a = bump(s.mesh, 0, 0);
  a[s.mesh.interior_nodes[30]] = std::nan("");
  Eigen::VectorXd rate = Eigen::VectorXd::Zero(21);
  rate[5] = 1.0;
  try {
    (void)s.solver->solve_forward(a, rate);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.step() >= 1);
  }
}

TEST_CASE("energy: conserved without damping, decaying with damping") {
  const int nx = 20, nt = 400, off = 50;
  const Mesh mesh = build_mesh(nx);
  const FemMatrices fem = assemble(mesh, 1.0, 8.0, nt, 0.2);
  Eigen::VectorXd rate = Eigen::VectorXd::Zero(nt + 1);
  for (int m = 0; m <= off; ++m) rate[m] = std::sin(kPi * m / off);
  const Field a = bump(mesh, 0.0, 0.1);

  auto energies = [&](double alpha, double b_scale) {
    FracParams p = FracParams::from_attenuation(alpha, 1e-4, 300.0);
    p.b *= b_scale;
    const WaveSolver s(mesh, fem, p, TimeGrid::make(0.2, nt, alpha));
    const WaveTrajectory tr = s.solve_forward(a, rate, TrajectoryStorage::DisplacementAndVelocity);
    std::vector<double> e;
    for (int m = off; m <= nt; ++m) e.push_back(s.energy(tr.displacement.col(m), tr.velocity.col(m)));
    return e;
  };

  const std::vector<double> undamped = energies(0.3, 0.0);
  for (double e : undamped) CHECK(std::abs(e - undamped.front()) <= 1e-10 * undamped.front());

  // step-wise decay holds for alpha = 0.8 at the physical damping
  const std::vector<double> e8 = energies(0.8, 1.0);
  for (std::size_t m = 1; m < e8.size(); ++m) CHECK(e8[m] <= e8[m - 1] * (1.0 + 1e-8));

  // at alpha = 0.3 the memory term returns energy now and then; only the
  // overall decay is asserted
  const std::vector<double> e3 = energies(0.3, 1.0);
  CHECK(e3.back() < 1e-2 * e3.front());
  CHECK(e3.back() < undamped.back());
}

TEST_CASE("manufactured solution converges") {
  // u* = t^2 sin(pi x) sin(pi y), c = 1, b = 0.5, alpha = 0.5, T = 1
  const double alpha = 0.5, b = 0.5, c = 1.0, T = 1.0;
  std::vector<double> errs;
  for (int level = 0; level < 3; ++level) {
    const int nx = 10 << level;
    const int nt = 10 << level;
    const Mesh mesh = build_mesh(nx);
    const FemMatrices fem = assemble(mesh, 1.0, 8.0, nt, T);
    const WaveSolver s(mesh, fem, FracParams{alpha, b, c}, TimeGrid::make(T, nt, alpha));
    Field shape(mesh.num_nodes());
    for (int i = 0; i < mesh.num_nodes(); ++i) shape[i] = std::sin(kPi * mesh.nodes[i].x) * std::sin(kPi * mesh.nodes[i].y);
    Eigen::VectorXd rate(nt + 1);
    for (int m = 0; m <= nt; ++m) {
      const double t = m * T / nt;
      rate[m] = 2.0 / (c * c) + 2.0 * kPi * kPi * t * t + b * 2.0 * kPi * kPi * 2.0 * std::pow(t, 2.0 - alpha) / std::tgamma(3.0 - alpha);
    }
    const WaveTrajectory tr = s.solve_forward(shape, rate, TrajectoryStorage::Displacement);
    errs.push_back(s.mass_norm(tr.displacement.col(nt) - T * T * shape) / s.mass_norm(T * T * shape));
  }
  CHECK(errs[1] < errs[0]);
  CHECK(errs[2] < errs[1]);
  CHECK(errs[2] < 1e-2);
}
