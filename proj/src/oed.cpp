#include "fracpat/oed.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include "json.hpp"
#include <sstream>
#include <stdexcept>

#include "fracpat/format.hpp"

namespace fracpat {

Eigen::MatrixXd MisfitGram::combine(const Eigen::VectorXd& d) const {
  if (d.size() != K) throw std::invalid_argument("design has " + std::to_string(d.size()) + " coefficients, Gram has K=" + std::to_string(K));
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(N, N);
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < K; ++l) {
      const double w = d[k] * d[l];
      if (w != 0.0) h += w * block(k, l);
    }
  }
  return 0.5 * (h + h.transpose());
}

MisfitGram precompute_gram(const WaveSolver& solver, const ProjectionBasis& basis, int K, double omega) {
  const int N = basis.rank();
  if (N < 1) throw std::invalid_argument("precompute_gram: basis rank must be >= 1");
  if (K < 1) throw std::invalid_argument("precompute_gram: K must be >= 1");
  const TimeGrid& grid = solver.grid();
  const int no = solver.num_obs();
  const Eigen::Index rows = static_cast<Eigen::Index>(grid.nt + 1) * no;

  Eigen::LLT<Eigen::MatrixXd> bllt(solver.fem().obs_mass);
  if (bllt.info() != Eigen::Success) throw SolverError("precompute_gram: observation mass is not positive definite");
  const Eigen::MatrixXd lt = bllt.matrixU();  // B = L L^T, rows of y mapped to L^T y
  Eigen::VectorXd sqrt_w = grid.simpson.array().sqrt();

  std::vector<Eigen::VectorXd> rates(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) rates[static_cast<std::size_t>(k)] = IntensityDesign::mode(k + 1, K, omega).rate_samples(grid);

  // column j of Z_k is the weighted, factored trace of W_{psi_k} e_j, so that
  // G[k][l] = Z_k^T Z_l
  std::vector<Eigen::MatrixXd> z(static_cast<std::size_t>(K), Eigen::MatrixXd(rows, N));
  const int jobs = K * N;
  std::string failure;
#pragma omp parallel for schedule(dynamic)
  for (int job = 0; job < jobs; ++job) {
    const int k = job / N;
    const int j = job % N;
    try {
      const ObservationSeries y = solver.apply_W(basis.vectors.col(j), rates[static_cast<std::size_t>(k)]);
      Eigen::MatrixXd& zk = z[static_cast<std::size_t>(k)];
      for (int m = 0; m <= grid.nt; ++m) {
        zk.col(j).segment(static_cast<Eigen::Index>(m) * no, no) = sqrt_w[m] * (lt * y.values.row(m).transpose());
      }
    } catch (const std::exception& e) {
#pragma omp critical
      if (failure.empty()) failure = "precompute_gram (k=" + std::to_string(k + 1) + ", j=" + std::to_string(j) + "): " + e.what();
    }
  }
  if (!failure.empty()) throw SolverError(failure);

  MisfitGram g;
  g.K = K;
  g.N = N;
  g.omega = omega;
  g.T = grid.T;
  g.lambda = basis.lambda;
  g.full_trace = basis.full_trace;
  g.blocks.resize(static_cast<std::size_t>(K * K));
  for (int k = 0; k < K; ++k) {
    for (int l = k; l < K; ++l) {
      Eigen::MatrixXd blk = z[static_cast<std::size_t>(k)].transpose() * z[static_cast<std::size_t>(l)];
      if (k == l) blk = 0.5 * (blk + blk.transpose());
      g.blocks[static_cast<std::size_t>(l * K + k)] = blk.transpose();
      g.blocks[static_cast<std::size_t>(k * K + l)] = std::move(blk);
    }
  }
  return g;
}

namespace {

Eigen::MatrixXd posterior_projected(const Eigen::VectorXd& d, double I, const MisfitGram& gram, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  if (!(gram.lambda.array() > 0.0).all()) throw std::invalid_argument("prior eigenvalues must be positive");
  Eigen::MatrixXd h = (I * I / sigma2) * gram.combine(d);
  h.diagonal() += gram.lambda.cwiseInverse();
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) throw SolverError("projected posterior is not positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(gram.N, gram.N));
}

}  // namespace

double phi_N(const Eigen::VectorXd& d, double I, const MisfitGram& gram, double sigma2) {
  return posterior_projected(d, I, gram, sigma2).trace() + gram.tail_trace();
}

Eigen::VectorXd grad_phi_N(const Eigen::VectorXd& d, double I, const MisfitGram& gram, double sigma2) {
  const Eigen::MatrixXd s = posterior_projected(d, I, gram, sigma2);
  const Eigen::MatrixXd s2 = s * s;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(gram.K);
  for (int k = 0; k < gram.K; ++k) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(gram.N, gram.N);
    for (int j = 0; j < gram.K; ++j) {
      if (d[j] != 0.0) x += d[j] * (gram.block(k, j) + gram.block(j, k));
    }
    g[k] = -(I * I / sigma2) * s2.cwiseProduct(x.transpose()).sum();
  }
  return g;
}

BlockPrior BlockPrior::split(const Eigen::MatrixXd& representation, int N) {
  const Eigen::Index n = representation.rows();
  if (representation.cols() != n || N < 1 || N > n) throw std::invalid_argument("BlockPrior::split: bad sizes");
  BlockPrior p;
  p.A = representation.topLeftCorner(N, N);
  p.B = representation.topRightCorner(N, n - N);
  p.D = representation.bottomRightCorner(n - N, n - N);
  return p;
}

double trace_general_projection(const Eigen::MatrixXd& H, const BlockPrior& prior) {
  if (H.rows() != prior.A.rows() || H.cols() != prior.A.cols()) throw std::invalid_argument("trace_general_projection: H size");
  Eigen::MatrixXd l = H + prior.A;
  double tail = 0.0;
  Eigen::MatrixXd dinv_bt;  // D^-1 B^T
  if (prior.D.size() > 0) {
    Eigen::LLT<Eigen::MatrixXd> dllt(prior.D);
    if (dllt.info() != Eigen::Success) throw SolverError("trace_general_projection: D is not positive definite");
    dinv_bt = dllt.solve(prior.B.transpose());
    l -= prior.B * dinv_bt;
    tail = dllt.solve(Eigen::MatrixXd::Identity(prior.D.rows(), prior.D.cols())).trace();
  }
  l = 0.5 * (l + l.transpose());
  Eigen::LLT<Eigen::MatrixXd> lllt(l);
  if (lllt.info() != Eigen::Success) throw SolverError("trace_general_projection: Schur complement is not positive definite");
  const Eigen::MatrixXd linv = lllt.solve(Eigen::MatrixXd::Identity(l.rows(), l.cols()));
  double out = linv.trace() + tail;
  // tr(D^-1 B^T L^-1 B D^-1) = tr(L^-1 (B D^-1)(D^-1 B^T))
  if (prior.D.size() > 0) out += (linv * (dinv_bt.transpose() * dinv_bt)).trace();
  return out;
}

namespace {

Eigen::VectorXd simpson_rule(int intervals, double T) {
  if (intervals < 2 || intervals % 2 != 0) throw std::invalid_argument("Simpson rule needs an even number of intervals");
  const double h = T / intervals;
  Eigen::VectorXd w(intervals + 1);
  for (int i = 0; i <= intervals; ++i) w[i] = (i == 0 || i == intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
  return w * (h / 3.0);
}

}  // namespace

double h1_norm_intensity(const IntensityDesign& design, double T, int intervals) {
  const Eigen::VectorXd w = simpson_rule(intervals, T);
  double s = 0.0;
  for (int i = 0; i <= intervals; ++i) {
    const double t = T * i / intervals;
    const double v = design.value(t);
    const double r = design.rate(t);
    s += w[i] * (v * v + r * r);
  }
  return std::sqrt(s);
}

H1Form H1Form::build(int K, double omega, double T, int intervals) {
  if (K < 1) throw std::invalid_argument("H1Form: K must be >= 1");
  const Eigen::VectorXd w = simpson_rule(intervals, T);
  H1Form f;
  f.b = Eigen::VectorXd::Zero(K);
  f.Q = Eigen::MatrixXd::Zero(K, K);
  Eigen::VectorXd s(K), ds(K);
  for (int i = 0; i <= intervals; ++i) {
    const double t = T * i / intervals;
    for (int k = 0; k < K; ++k) {
      const double kw = (k + 1) * omega;
      s[k] = std::sin(kw * t);
      ds[k] = kw * std::cos(kw * t);
    }
    f.c0 += w[i];
    f.b += w[i] * s;
    f.Q += w[i] * (s * s.transpose() + ds * ds.transpose());
  }
  return f;
}

H1Policy parse_h1_policy(const std::string& name) {
  if (name == "ball") return H1Policy::Ball;
  if (name == "worst_case_cap") return H1Policy::WorstCaseCap;
  throw std::invalid_argument("unknown H1 policy '" + name + "'");
}

std::string to_string(H1Policy policy) { return policy == H1Policy::Ball ? "ball" : "worst_case_cap"; }

DesignConstraints DesignConstraints::make(int K, double omega, double T, int intervals, double I0, double factor,
                                          H1Policy policy) {
  if (!(I0 > 0.0) || !(factor > 0.0)) throw std::invalid_argument("H1 bound needs I0 > 0 and factor > 0");
  DesignConstraints c;
  c.policy = policy;
  c.form = H1Form::build(K, omega, T, intervals);
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(K);
  e1[0] = 1.0;
  c.h1_bound = factor * c.form.norm(I0, e1);
  return c;
}

double DesignConstraints::amplitude(const Eigen::VectorXd& d0) const {
  if (policy == H1Policy::Ball) return h1_bound / std::sqrt(form.unit_sq(d0));
  // a convex quadratic attains its maximum over the ell1 ball at a vertex
  double worst = form.c0;
  for (Eigen::Index k = 0; k < form.b.size(); ++k) {
    const double q = form.Q(k, k) * l1_bound * l1_bound;
    worst = std::max(worst, form.c0 + q + 2.0 * std::abs(form.b[k]) * l1_bound);
  }
  return h1_bound / std::sqrt(worst);
}

bool DesignConstraints::feasible(const Eigen::VectorXd& d, double I, double slack) const {
  if (d.lpNorm<1>() > l1_bound * (1.0 + slack)) return false;
  return form.norm(I, d) <= h1_bound * (1.0 + slack);
}

Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& y, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("ell1 radius must be positive");
  if (y.lpNorm<1>() <= radius) return y;
  std::vector<double> u(y.data(), y.data() + y.size());
  for (double& v : u) v = std::abs(v);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cum += u[i];
    const double t = (cum - radius) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  Eigen::VectorXd x(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double m = std::max(std::abs(y[i]) - theta, 0.0);
    x[i] = y[i] < 0.0 ? -m : m;
  }
  return x;
}

Eigen::VectorXd project_ellipsoid(const Eigen::VectorXd& y, const H1Form& form, double level) {
  if (form.unit_sq(y) <= level) return y;
  if (form.c0 - form.b.dot(form.Q.ldlt().solve(form.b)) > level) throw std::invalid_argument("empty H1 ellipsoid");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(form.Q);
  const Eigen::MatrixXd& v = es.eigenvectors();
  const Eigen::VectorXd& lam = es.eigenvalues();
  const Eigen::VectorXd vy = v.transpose() * y;
  const Eigen::VectorXd vb = v.transpose() * form.b;
  // KKT: (I + 2 mu Q) x = y - 2 mu b
  auto point = [&](double mu) -> Eigen::VectorXd {
    return v * ((vy - 2.0 * mu * vb).array() / (1.0 + 2.0 * mu * lam.array())).matrix();
  };
  double lo = 0.0;
  double hi = 1.0 / std::max(lam.maxCoeff(), 1e-300);
  while (form.unit_sq(point(hi)) > level) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw SolverError("project_ellipsoid: multiplier bracket failed");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (form.unit_sq(point(mid)) > level ? lo : hi) = mid;
  }
  return point(hi);
}

Eigen::VectorXd DesignConstraints::project(const Eigen::VectorXd& d, double I) const {
  if (policy == H1Policy::WorstCaseCap) return project_l1_ball(d, l1_bound);
  const double level = (h1_bound / I) * (h1_bound / I);
  // Dykstra's alternating projections onto the ball and the ellipsoid
  Eigen::VectorXd x = d;
  Eigen::VectorXd y = d;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(d.size());
  Eigen::VectorXd q = Eigen::VectorXd::Zero(d.size());
  for (int it = 0; it < 10000; ++it) {
    const Eigen::VectorXd x_new = project_l1_ball(y + p, l1_bound);
    p = y + p - x_new;
    const Eigen::VectorXd y_new = project_ellipsoid(x_new + q, form, level);
    q = x_new + q - y_new;
    const double change = (y_new - y).norm() + (x_new - x).norm();
    x = x_new;
    y = y_new;
    if (change <= 1e-15 * (1.0 + y.norm())) break;
  }
  // y lies in the ellipsoid; shrinking toward 0 keeps it there
  const double l1 = y.lpNorm<1>();
  if (l1 > l1_bound) y *= l1_bound / l1;
  return y;
}

DesignResult optimize_design(const MisfitGram& gram, const DesignConstraints& constraints, const Eigen::VectorXd& d0,
                             double sigma2, const OptimizerOptions& opts) {
  if (d0.size() != gram.K) throw std::invalid_argument("optimize_design: d0 has the wrong length");
  if (d0.lpNorm<1>() > constraints.l1_bound * (1.0 + 1e-12)) throw std::invalid_argument("optimize_design: d0 is infeasible");
  DesignResult res;
  res.I = constraints.amplitude(d0);
  if (!constraints.feasible(d0, res.I)) throw std::invalid_argument("optimize_design: d0 violates the H1 bound");
  res.d = d0;
  res.phi = res.phi0 = phi_N(res.d, res.I, gram, sigma2);
  res.history.push_back({0, res.phi, res.d.lpNorm<1>(), 0.0});
  double trial = opts.step;
  for (int it = 1; it <= opts.maxit; ++it) {
    const Eigen::VectorXd g = grad_phi_N(res.d, res.I, gram, sigma2);
    res.pg_norm = (res.d - constraints.project(res.d - g, res.I)).norm();
    if (res.pg_norm <= opts.tol) {
      res.converged = true;
      break;
    }
    double step = trial;
    bool accepted = false;
    for (int bt = 0; bt < opts.max_backtracks; ++bt) {
      const Eigen::VectorXd cand = constraints.project(res.d - step * g, res.I);
      const double phi_c = phi_N(cand, res.I, gram, sigma2);
      if (phi_c <= res.phi + opts.c1 * g.dot(cand - res.d)) {
        accepted = phi_c <= res.phi;
        if (accepted) {
          res.d = cand;
          res.phi = phi_c;
        }
        break;
      }
      step *= opts.shrink;
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }
    res.history.push_back({it, res.phi, res.d.lpNorm<1>(), step});
    trial = step / opts.shrink;
  }
  return res;
}

namespace {

std::uint64_t fnv1a(const std::string& s, std::uint64_t h) {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string matrix_csv(const Eigen::MatrixXd& m) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << fmt_double(m(i, j));
    os << '\n';
  }
  return os.str();
}

Eigen::MatrixXd parse_csv(const std::string& text, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  Eigen::MatrixXd m(rows, cols);
  std::istringstream is(text);
  std::string line;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(is, line)) throw std::runtime_error(name + ": too few rows");
    std::istringstream ls(line);
    std::string cell;
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!std::getline(ls, cell, ',')) throw std::runtime_error(name + ": too few columns");
      m(i, j) = std::stod(cell);
    }
  }
  return m;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

std::string block_name(int k, int l) { return "gram_" + std::to_string(k + 1) + "_" + std::to_string(l + 1) + ".csv"; }

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

void save_gram(const MisfitGram& gram, const GramManifest& meta, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::uint64_t h = 14695981039346656037ULL;
  const std::string lam = matrix_csv(gram.lambda);
  h = fnv1a(lam, h);
  write_file(fs::path(dir) / "lambda.csv", lam);
  for (int k = 0; k < gram.K; ++k) {
    for (int l = 0; l < gram.K; ++l) {
      const std::string s = matrix_csv(gram.block(k, l));
      h = fnv1a(s, h);
      write_file(fs::path(dir) / block_name(k, l), s);
    }
  }
  nlohmann::ordered_json j;
  j["K"] = gram.K;
  j["N"] = gram.N;
  j["omega"] = gram.omega;
  j["T"] = gram.T;
  j["nx"] = meta.nx;
  j["nt"] = meta.nt;
  j["alpha"] = meta.alpha;
  j["b"] = meta.b;
  j["c"] = meta.c;
  j["prior"] = meta.prior;
  j["full_trace"] = gram.full_trace;
  j["checksum"] = hex64(h);
  write_file(fs::path(dir) / "manifest.json", j.dump(2) + "\n");
}

MisfitGram load_gram(const std::string& manifest_path, GramManifest* meta) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(manifest_path).parent_path();
  const nlohmann::json j = nlohmann::json::parse(read_file(manifest_path));
  MisfitGram g;
  g.K = j.at("K").get<int>();
  g.N = j.at("N").get<int>();
  g.omega = j.at("omega").get<double>();
  g.T = j.at("T").get<double>();
  g.full_trace = j.at("full_trace").get<double>();
  if (g.K < 1 || g.N < 1) throw std::runtime_error("Gram manifest: K and N must be >= 1");
  std::uint64_t h = 14695981039346656037ULL;
  const std::string lam = read_file(dir / "lambda.csv");
  h = fnv1a(lam, h);
  g.lambda = parse_csv(lam, g.N, 1, "lambda.csv");
  g.blocks.resize(static_cast<std::size_t>(g.K * g.K));
  for (int k = 0; k < g.K; ++k) {
    for (int l = 0; l < g.K; ++l) {
      const std::string s = read_file(dir / block_name(k, l));
      h = fnv1a(s, h);
      g.blocks[static_cast<std::size_t>(k * g.K + l)] = parse_csv(s, g.N, g.N, block_name(k, l));
    }
  }
  if (hex64(h) != j.at("checksum").get<std::string>()) throw std::runtime_error("Gram checksum mismatch in " + dir.string());
  if (meta) {
    meta->nx = j.at("nx").get<int>();
    meta->nt = j.at("nt").get<int>();
    meta->alpha = j.at("alpha").get<double>();
    meta->b = j.at("b").get<double>();
    meta->c = j.at("c").get<double>();
    meta->prior = j.at("prior").get<std::string>();
  }
  return g;
}

}  // namespace fracpat
