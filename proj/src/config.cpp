#include "fracpat/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace fracpat {

ExperimentConfig::ExperimentConfig() {
  phantom.shapes = {
      {"disk", {-0.3, 0.25}, {0.2}, 1.0},
      {"disk", {0.3, 0.3}, {0.15}, 0.5},
      {"rect", {0.05, -0.3}, {0.7, 0.2}, 1.0},
  };
}

void ExperimentConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(mesh.nx >= 10 && mesh.nx % 10 == 0, "mesh.nx must be a positive multiple of 10");
  need(time.T > 0.0, "time.T must be positive");
  need(time.nt == 0 || (time.nt >= 2 && time.nt % 2 == 0), "time.nt must be even (or 0 for automatic)");
  need(physics.alpha > 0.0 && physics.alpha < 1.0, "physics.alpha must lie in (0, 1)");
  need(physics.r0 >= 0.0, "physics.r0 must be nonnegative");
  need(physics.c > 0.0, "physics.c must be positive");
  need(prior.kind == "bilaplacian" || prior.kind == "ornstein_uhlenbeck", "prior.kind must be bilaplacian or ornstein_uhlenbeck");
  need(prior.gamma > 0.0 && prior.delta > 0.0 && prior.eta > 0.0 && prior.ell > 0.0, "prior parameters must be positive");
  need(noise.sigma2 > 0.0, "noise.sigma2 must be positive");
  need(design.I > 0.0, "design.I must be positive");
  need(design.omega > 0.0, "design.omega must be positive");
  need(design.K >= 1, "design.K must be >= 1");
  need(static_cast<int>(design.d.size()) == design.K, "design.d must have K entries");
  double l1 = 0.0;
  for (double v : design.d) l1 += std::abs(v);
  need(l1 <= 1.0 + 1e-12, "design.d must satisfy |d|_1 <= 1");
  const int n = (mesh.nx + 1) * (mesh.nx + 1);
  need(oed.N >= 0 && oed.N <= n, "oed.N must lie in [0, number of nodes]");
  need(oed.tol > 0.0 && oed.maxit >= 1, "oed.tol must be positive and oed.maxit >= 1");
  need(oed.h1_factor > 0.0, "oed.h1_factor must be positive");
  need(oed.h1_policy == "ball" || oed.h1_policy == "worst_case_cap", "oed.h1_policy must be ball or worst_case_cap");
  need(solver.cg_rtol > 0.0 && solver.cg_maxit >= 1, "solver.cg_rtol must be positive and solver.cg_maxit >= 1");
  need(solver.adjoint == "transpose" || solver.adjoint == "continuous", "solver.adjoint must be transpose or continuous");
  need(!io.outdir.empty(), "io.outdir must be nonempty");
  for (const ShapeConfig& s : phantom.shapes) {
    need(s.kind == "disk" || s.kind == "rect", "phantom shape kind must be disk or rect");
    need(s.size.size() == (s.kind == "disk" ? 1u : 2u), "phantom disk needs size [radius], rect needs [width, height]");
    need(std::all_of(s.size.begin(), s.size.end(), [](double v) { return v > 0.0; }), "phantom sizes must be positive");
  }
}

int ExperimentConfig::resolved_nt() const {
  if (time.nt > 0) return time.nt;
  const int nt = static_cast<int>(std::ceil(physics.c * time.T * mesh.nx / 2.0 - 1e-9));
  return std::max(2, nt + (nt % 2));
}

int ExperimentConfig::resolved_N() const {
  if (oed.N > 0) return oed.N;
  const int n = (mesh.nx + 1) * (mesh.nx + 1);
  return std::min(160, n / 4);
}

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) throw ConfigError("unknown key '" + (where.empty() ? "" : where + ".") + it.key() + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + where + "." + key + "'");
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  check_keys(j, "", {"mesh", "time", "physics", "prior", "noise", "design", "oed", "solver", "io", "phantom"});
  if (j.contains("mesh")) {
    const json& s = j["mesh"];
    check_keys(s, "mesh", {"nx"});
    read(s, "nx", c.mesh.nx, "mesh");
  }
  if (j.contains("time")) {
    const json& s = j["time"];
    check_keys(s, "time", {"T", "nt"});
    read(s, "T", c.time.T, "time");
    read(s, "nt", c.time.nt, "time");
  }
  if (j.contains("physics")) {
    const json& s = j["physics"];
    check_keys(s, "physics", {"alpha", "r0", "c"});
    read(s, "alpha", c.physics.alpha, "physics");
    read(s, "r0", c.physics.r0, "physics");
    read(s, "c", c.physics.c, "physics");
  }
  if (j.contains("prior")) {
    const json& s = j["prior"];
    check_keys(s, "prior", {"kind", "gamma", "delta", "eta", "ell"});
    read(s, "kind", c.prior.kind, "prior");
    read(s, "gamma", c.prior.gamma, "prior");
    read(s, "delta", c.prior.delta, "prior");
    read(s, "eta", c.prior.eta, "prior");
    read(s, "ell", c.prior.ell, "prior");
  }
  if (j.contains("noise")) {
    const json& s = j["noise"];
    check_keys(s, "noise", {"sigma2", "seed"});
    read(s, "sigma2", c.noise.sigma2, "noise");
    read(s, "seed", c.noise.seed, "noise");
  }
  if (j.contains("design")) {
    const json& s = j["design"];
    check_keys(s, "design", {"I", "d", "omega", "K"});
    read(s, "I", c.design.I, "design");
    read(s, "d", c.design.d, "design");
    read(s, "omega", c.design.omega, "design");
    read(s, "K", c.design.K, "design");
  }
  if (j.contains("oed")) {
    const json& s = j["oed"];
    check_keys(s, "oed", {"N", "tol", "maxit", "h1_factor", "h1_policy"});
    read(s, "N", c.oed.N, "oed");
    read(s, "tol", c.oed.tol, "oed");
    read(s, "maxit", c.oed.maxit, "oed");
    read(s, "h1_factor", c.oed.h1_factor, "oed");
    read(s, "h1_policy", c.oed.h1_policy, "oed");
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s, "solver", {"cg_rtol", "cg_maxit", "adjoint", "smooth_data"});
    read(s, "cg_rtol", c.solver.cg_rtol, "solver");
    read(s, "cg_maxit", c.solver.cg_maxit, "solver");
    read(s, "adjoint", c.solver.adjoint, "solver");
    read(s, "smooth_data", c.solver.smooth_data, "solver");
  }
  if (j.contains("io")) {
    const json& s = j["io"];
    check_keys(s, "io", {"outdir", "emit_images"});
    read(s, "outdir", c.io.outdir, "io");
    read(s, "emit_images", c.io.emit_images, "io");
  }
  if (j.contains("phantom")) {
    const json& s = j["phantom"];
    check_keys(s, "phantom", {"shapes"});
    if (s.contains("shapes")) {
      if (!s["shapes"].is_array()) throw ConfigError("phantom.shapes must be an array");
      c.phantom.shapes.clear();
      for (const json& e : s["shapes"]) {
        check_keys(e, "phantom.shapes[]", {"kind", "center", "size", "value"});
        ShapeConfig sh;
        read(e, "kind", sh.kind, "phantom.shapes[]");
        read(e, "center", sh.center, "phantom.shapes[]");
        read(e, "size", sh.size, "phantom.shapes[]");
        read(e, "value", sh.value, "phantom.shapes[]");
        c.phantom.shapes.push_back(sh);
      }
    }
  }
  c.validate();
  return c;
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["mesh"] = {{"nx", c.mesh.nx}};
  j["time"] = {{"T", c.time.T}, {"nt", c.time.nt}};
  j["physics"] = {{"alpha", c.physics.alpha}, {"r0", c.physics.r0}, {"c", c.physics.c}};
  j["prior"] = {{"kind", c.prior.kind}, {"gamma", c.prior.gamma}, {"delta", c.prior.delta}, {"eta", c.prior.eta}, {"ell", c.prior.ell}};
  j["noise"] = {{"sigma2", c.noise.sigma2}, {"seed", c.noise.seed}};
  j["design"] = {{"I", c.design.I}, {"d", c.design.d}, {"omega", c.design.omega}, {"K", c.design.K}};
  j["oed"] = {{"N", c.oed.N}, {"tol", c.oed.tol}, {"maxit", c.oed.maxit}, {"h1_factor", c.oed.h1_factor}, {"h1_policy", c.oed.h1_policy}};
  j["solver"] = {{"cg_rtol", c.solver.cg_rtol}, {"cg_maxit", c.solver.cg_maxit}, {"adjoint", c.solver.adjoint}, {"smooth_data", c.solver.smooth_data}};
  j["io"] = {{"outdir", c.io.outdir}, {"emit_images", c.io.emit_images}};
  nlohmann::ordered_json shapes = nlohmann::ordered_json::array();
  for (const ShapeConfig& s : c.phantom.shapes) {
    shapes.push_back({{"kind", s.kind}, {"center", s.center}, {"size", s.size}, {"value", s.value}});
  }
  j["phantom"] = {{"shapes", shapes}};
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

}  // namespace fracpat
