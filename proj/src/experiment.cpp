#include "fracpat/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fracpat/format.hpp"

namespace fracpat {

namespace fs = std::filesystem;

Field build_phantom(const Mesh& mesh, const std::vector<ShapeConfig>& shapes) {
  Field a = Field::Zero(mesh.num_nodes());
  for (const ShapeConfig& s : shapes) {
    for (int i = 0; i < mesh.num_nodes(); ++i) {
      const double dx = mesh.nodes[i].x - s.center[0];
      const double dy = mesh.nodes[i].y - s.center[1];
      const bool inside = s.kind == "disk" ? dx * dx + dy * dy <= s.size[0] * s.size[0]
                                           : std::abs(dx) <= 0.5 * s.size[0] && std::abs(dy) <= 0.5 * s.size[1];
      if (inside) a[i] = s.value;
    }
  }
  return a;
}

void write_series_csv(std::ostream& os, const ObservationSeries& g, const Mesh& mesh, const TimeGrid& grid) {
  os << "t";
  for (int id : mesh.obs_nodes) os << ",node_" << id;
  os << '\n';
  for (Eigen::Index m = 0; m < g.values.rows(); ++m) {
    os << fmt_double(grid.time(static_cast<int>(m)));
    for (Eigen::Index k = 0; k < g.values.cols(); ++k) os << ',' << fmt_double(g.values(m, k));
    os << '\n';
  }
}

ObservationSeries read_series_csv(const std::string& path, const Mesh& mesh, const TimeGrid& grid) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open observation file '" + path + "'");
  std::string line;
  std::getline(in, line);
  const auto cols = std::count(line.begin(), line.end(), ',');
  if (cols != mesh.num_obs()) throw ConfigError("observation file has " + std::to_string(cols) + " traces, expected " + std::to_string(mesh.num_obs()));
  ObservationSeries g;
  g.values.resize(grid.nt + 1, mesh.num_obs());
  for (int m = 0; m <= grid.nt; ++m) {
    if (!std::getline(in, line)) throw ConfigError("observation file has too few time steps");
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    for (int k = 0; k < mesh.num_obs(); ++k) {
      if (!std::getline(ls, cell, ',')) throw ConfigError("observation file row " + std::to_string(m) + " is short");
      try {
        g.values(m, k) = std::stod(cell);
      } catch (const std::exception&) {
        throw ConfigError("observation file: bad number '" + cell + "'");
      }
    }
  }
  if (std::getline(in, line) && !line.empty()) throw ConfigError("observation file has extra rows");
  return g;
}

void write_field_csv(std::ostream& os, const Field& a, const Mesh& mesh) {
  os << "node,x,y,value\n";
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    os << i << ',' << fmt_double(mesh.nodes[i].x) << ',' << fmt_double(mesh.nodes[i].y) << ',' << fmt_double(a[i]) << '\n';
  }
}

void write_pgm(const std::string& path, const Field& a, const Mesh& mesh) {
  const double lo = a.minCoeff();
  const double hi = a.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  const int w = mesh.nx + 1;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << w << ' ' << w << "\n255\n";
  for (int j = mesh.nx; j >= 0; --j) {
    for (int i = 0; i <= mesh.nx; ++i) {
      const double v = (a[mesh.node_id(i, j)] - lo) / span;
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)))));
    }
  }
  std::ofstream side(path + ".txt");
  side << "min " << fmt_double(lo) << "\nmax " << fmt_double(hi) << "\nwidth " << w << "\nheight " << w
       << "\ntop_row y=1\n";
}

namespace {

PriorSpec prior_spec(const ExperimentConfig& c) {
  PriorSpec p;
  p.kind = parse_prior_kind(c.prior.kind);
  p.gamma = c.prior.gamma;
  p.delta = c.prior.delta;
  p.eta = c.prior.eta;
  p.ell = c.prior.ell;
  return p;
}

std::ofstream open_out(const ExperimentConfig& c, const std::string& name) {
  fs::create_directories(c.io.outdir);
  std::ofstream out(fs::path(c.io.outdir) / name, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (fs::path(c.io.outdir) / name).string());
  return out;
}

}  // namespace

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int nt = cfg_.resolved_nt();
  mesh_ = build_mesh(cfg_.mesh.nx);
  fem_ = assemble(mesh_, cfg_.prior.gamma, cfg_.prior.delta, nt, cfg_.time.T);
  const FracParams params = FracParams::from_attenuation(cfg_.physics.alpha, cfg_.physics.r0, cfg_.physics.c);
  solver_ = std::make_unique<WaveSolver>(mesh_, fem_, params, TimeGrid::make(cfg_.time.T, nt, cfg_.physics.alpha));
  prior_ = make_prior(prior_spec(cfg_), mesh_, fem_);
  phantom_ = build_phantom(mesh_, cfg_.phantom.shapes);
}

IntensityDesign Experiment::design(double I, const std::vector<double>& d) const {
  IntensityDesign des;
  des.amplitude = I;
  des.coeffs = d;
  des.omega = cfg_.design.omega;
  return des;
}

IntensityDesign Experiment::configured_design() const { return design(cfg_.design.I, cfg_.design.d); }

std::pair<ObservationSeries, ObservationSeries> Experiment::observe(const IntensityDesign& des) const {
  ObservationSeries clean = solver_->apply_W(phantom_, des);
  ObservationSeries noisy = add_noise(clean, std::sqrt(cfg_.noise.sigma2), cfg_.noise.seed);
  return {std::move(clean), std::move(noisy)};
}

MapResult Experiment::reconstruct(const ObservationSeries& obs, const IntensityDesign& des) const {
  InverseProblemSetup setup;
  setup.design = des;
  setup.sigma2 = cfg_.noise.sigma2;
  setup.p_obs = cfg_.solver.smooth_data ? smooth_in_time(obs) : obs;
  setup.options.cg_rtol = cfg_.solver.cg_rtol;
  setup.options.cg_maxit = cfg_.solver.cg_maxit;
  setup.options.adjoint = cfg_.solver.adjoint == "continuous" ? AdjointMode::Continuous : AdjointMode::Transpose;
  return map_estimate(*solver_, *prior_, setup);
}

double Experiment::phantom_error(const Field& a) const { return rel_error(a, phantom_, fem_.mass); }

ForwardOutput cmd_forward(const ExperimentConfig& cfg) {
  const Experiment ex(cfg);
  ForwardOutput out;
  std::tie(out.clean, out.noisy) = ex.observe(ex.configured_design());
  out.max_abs = out.clean.values.cwiseAbs().maxCoeff();
  {
    auto os = open_out(cfg, "phantom.csv");
    write_field_csv(os, ex.phantom(), ex.mesh());
  }
  {
    auto os = open_out(cfg, "obs_clean.csv");
    write_series_csv(os, out.clean, ex.mesh(), ex.solver().grid());
  }
  {
    auto os = open_out(cfg, "obs_noisy.csv");
    write_series_csv(os, out.noisy, ex.mesh(), ex.solver().grid());
  }
  {
    nlohmann::ordered_json j;
    j["seed"] = cfg.noise.seed;
    j["nx"] = cfg.mesh.nx;
    j["nt"] = cfg.resolved_nt();
    j["max_abs"] = out.max_abs;
    auto os = open_out(cfg, "forward.json");
    os << j.dump() << '\n';
  }
  if (cfg.io.emit_images) write_pgm((fs::path(cfg.io.outdir) / "phantom.pgm").string(), ex.phantom(), ex.mesh());
  return out;
}

ReconstructOutput cmd_reconstruct(const ExperimentConfig& cfg, const std::string& obs_path) {
  const Experiment ex(cfg);
  const IntensityDesign des = ex.configured_design();
  const ObservationSeries obs =
      obs_path.empty() ? ex.observe(des).second : read_series_csv(obs_path, ex.mesh(), ex.solver().grid());
  ReconstructOutput out;
  out.map = ex.reconstruct(obs, des);
  if (ex.phantom().cwiseAbs().maxCoeff() > 0.0) out.rel_error = ex.phantom_error(out.map.a_map);
  {
    auto os = open_out(cfg, "a_map.csv");
    write_field_csv(os, out.map.a_map, ex.mesh());
  }
  {
    auto os = open_out(cfg, "objective.csv");
    os << "iter,objective,residual\n";
    for (std::size_t i = 0; i < out.map.stats.objective.size(); ++i) {
      os << i << ',' << fmt_double(out.map.stats.objective[i]) << ',' << fmt_double(out.map.stats.residual_history[i]) << '\n';
    }
  }
  {
    nlohmann::ordered_json j;
    j["iters"] = out.map.stats.iterations;
    j["residual"] = out.map.stats.residual;
    j["converged"] = out.map.stats.converged;
    j["rel_error"] = out.rel_error ? nlohmann::ordered_json(*out.rel_error) : nlohmann::ordered_json(nullptr);
    j["seed"] = cfg.noise.seed;
    auto os = open_out(cfg, "stats.jsonl");
    os << j.dump() << '\n';
  }
  if (cfg.io.emit_images) write_pgm((fs::path(cfg.io.outdir) / "a_map.pgm").string(), out.map.a_map, ex.mesh());
  return out;
}

OedOutput cmd_oed(const ExperimentConfig& cfg, const std::string& gram_manifest) {
  const Experiment ex(cfg);
  const int K = cfg.design.K;
  const double omega = cfg.design.omega;
  const int nt = cfg.resolved_nt();
  const FracParams& fp = ex.solver().params();

  MisfitGram gram;
  if (gram_manifest.empty()) {
    gram = precompute_gram(ex.solver(), ex.prior().eigenbasis(cfg.resolved_N()), K, omega);
    GramManifest meta{cfg.mesh.nx, nt, fp.alpha, fp.b, fp.c, cfg.prior.kind};
    save_gram(gram, meta, (fs::path(cfg.io.outdir) / "gram").string());
  } else {
    GramManifest meta;
    try {
      gram = load_gram(gram_manifest, &meta);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    if (gram.K != K || gram.N != cfg.resolved_N() || meta.nx != cfg.mesh.nx || meta.nt != nt || meta.prior != cfg.prior.kind ||
        gram.omega != omega || gram.T != cfg.time.T || meta.alpha != fp.alpha || meta.b != fp.b || meta.c != fp.c) {
      throw ConfigError("Gram manifest '" + gram_manifest + "' does not match the configuration");
    }
  }

  const DesignConstraints cons = DesignConstraints::make(K, omega, cfg.time.T, 10 * nt, cfg.design.I, cfg.oed.h1_factor,
                                                         parse_h1_policy(cfg.oed.h1_policy));
  const Eigen::VectorXd d0 = Eigen::Map<const Eigen::VectorXd>(cfg.design.d.data(), K);
  OptimizerOptions opts;
  opts.tol = cfg.oed.tol;
  opts.maxit = cfg.oed.maxit;
  OedOutput out;
  out.result = optimize_design(gram, cons, d0, cfg.noise.sigma2, opts);

  auto score = [&](const std::string& label, double I, const Eigen::VectorXd& d) {
    DesignScore s;
    s.label = label;
    s.I = I;
    s.d.assign(d.data(), d.data() + d.size());
    s.phi = phi_N(d, I, gram, cfg.noise.sigma2);
    const IntensityDesign des = ex.design(I, s.d);
    const MapResult r = ex.reconstruct(ex.observe(des).second, des);
    s.rel_error = ex.phantom_error(r.a_map);
    s.iterations = r.stats.iterations;
    return s;
  };
  Eigen::VectorXd dmax = Eigen::VectorXd::Zero(K);
  dmax[K - 1] = 1.0 / K;
  out.initial = score("initial", cfg.design.I, d0);
  out.optimal = score("optimal", out.result.I, out.result.d);
  out.max_frequency = score("max_frequency", out.result.I, dmax);

  {
    auto os = open_out(cfg, "design.csv");
    os << "k,d0,d_opt\n";
    for (int k = 0; k < K; ++k) os << k + 1 << ',' << fmt_double(d0[k]) << ',' << fmt_double(out.result.d[k]) << '\n';
  }
  {
    auto os = open_out(cfg, "history.csv");
    os << "iter,phi,l1,step\n";
    for (const OptimizerRecord& r : out.result.history) {
      os << r.iter << ',' << fmt_double(r.phi) << ',' << fmt_double(r.l1) << ',' << fmt_double(r.step) << '\n';
    }
  }
  {
    auto os = open_out(cfg, "comparison.csv");
    os << "label,I,phi,rel_error,iters\n";
    for (const DesignScore* s : {&out.initial, &out.optimal, &out.max_frequency}) {
      os << s->label << ',' << fmt_double(s->I) << ',' << fmt_double(s->phi) << ',' << fmt_double(s->rel_error) << ','
         << s->iterations << '\n';
    }
  }
  {
    nlohmann::ordered_json j;
    j["K"] = K;
    j["N"] = gram.N;
    j["h1_policy"] = cfg.oed.h1_policy;
    j["h1_bound"] = cons.h1_bound;
    j["I_opt"] = out.result.I;
    j["d_opt"] = out.optimal.d;
    j["phi_start_at_I_opt"] = out.result.phi0;
    j["phi_opt"] = out.result.phi;
    j["converged"] = out.result.converged;
    j["line_search_failed"] = out.result.line_search_failed;
    j["iterations"] = out.result.history.back().iter;
    j["seed"] = cfg.noise.seed;
    auto os = open_out(cfg, "oed.json");
    os << j.dump() << '\n';
  }
  return out;
}

EigOutput cmd_eig(const ExperimentConfig& cfg) {
  const Experiment ex(cfg);
  Eigen::MatrixXd vectors;
  EigOutput out;
  ex.prior().full_eigensystem(out.lambda, vectors);
  out.full_trace = out.lambda.sum();
  // covariance of the coefficient vector is Gamma_pr M^-1 = E diag(lambda) E^T
  if (const auto* ou = dynamic_cast<const OrnsteinUhlenbeckPrior*>(&ex.prior())) {
    out.coefficient_trace = ou->covariance().trace();
  } else {
    out.coefficient_trace = (vectors.colwise().squaredNorm().transpose().array() * out.lambda.array()).sum();
  }
  {
    auto os = open_out(cfg, "eigenvalues.csv");
    os << "index,lambda\n";
    for (Eigen::Index k = 0; k < out.lambda.size(); ++k) os << k + 1 << ',' << fmt_double(out.lambda[k]) << '\n';
  }
  {
    nlohmann::ordered_json j;
    j["prior"] = cfg.prior.kind;
    j["n"] = out.lambda.size();
    j["lambda_max"] = out.lambda[0];
    j["full_trace"] = out.full_trace;
    j["coefficient_trace"] = out.coefficient_trace;
    auto os = open_out(cfg, "eig.json");
    os << j.dump() << '\n';
  }
  return out;
}

}  // namespace fracpat
