#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fracpat/experiment.hpp"

using namespace fracpat;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fracpat_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run(const std::string& args) {
  const std::string cmd = std::string(FRACPAT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.mesh.nx = 10;
  c.time.nt = 100;
  c.io.outdir = out.string();
  c.io.emit_images = false;
  return c;
}

}  // namespace

TEST_CASE("config defaults and derived sizes") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.resolved_nt() == 600);
  CHECK(c.resolved_N() == 110);
  c.mesh.nx = 50;
  CHECK(c.resolved_N() == 160);
  CHECK(c.resolved_nt() == 1500);
}

TEST_CASE("config round trip") {
  ExperimentConfig c;
  c.prior.kind = "ornstein_uhlenbeck";
  c.design.d = {0.4, 0.2, 0.1, 0.1, 0.1};
  c.noise.seed = 123456789012345ULL;
  c.phantom.shapes.push_back({"rect", {0.1, 0.2}, {0.3, 0.4}, 0.5});
  const auto j1 = config_to_json(c);
  const ExperimentConfig back = config_from_json(nlohmann::json::parse(j1.dump()));
  CHECK(config_to_json(back).dump() == j1.dump());
  CHECK(back.noise.seed == 123456789012345ULL);
  CHECK(config_from_json(nlohmann::json::object()).mesh.nx == 20);
}

TEST_CASE("config rejects unknown keys and invalid values") {
  using nlohmann::json;
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"meshes": {}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"mesh": {"nx": 20, "ny": 20}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"phantom": {"shapes": [{"kind": "disk", "radius": 1}]}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"mesh": {"nx": 15}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"time": {"nt": 101}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"design": {"d": [0.8, 0.8, 0, 0, 0]}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"design": {"d": [1.0]}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"noise": {"sigma2": 0}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"physics": {"alpha": 1.0}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"prior": {"kind": "tv"}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"mesh": {"nx": "twenty"}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"phantom": {"shapes": [{"kind": "rect", "size": [0.1]}]}})")), ConfigError);
}

TEST_CASE("default phantom") {
  const Mesh mesh = build_mesh(20);
  const ExperimentConfig c;
  const Field a = build_phantom(mesh, c.phantom.shapes);
  int positive = 0;
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    CHECK((a[i] == 0.0 || a[i] == 0.5 || a[i] == 1.0));
    if (a[i] > 0.0) {
      ++positive;
      CHECK(std::abs(mesh.nodes[i].x) <= 0.6 + 1e-12);
      CHECK(std::abs(mesh.nodes[i].y) <= 0.6 + 1e-12);
    }
  }
  CHECK(positive > 20);
  CHECK((a.array() == 0.5).any());
}

TEST_CASE("observation CSV round trip") {
  const Experiment ex(small_config(scratch_dir("csv")));
  const ObservationSeries g = ex.observe(ex.configured_design()).second;
  const fs::path p = fs::path(ex.config().io.outdir) / "g.csv";
  {
    std::ofstream os(p);
    write_series_csv(os, g, ex.mesh(), ex.solver().grid());
  }
  const ObservationSeries back = read_series_csv(p.string(), ex.mesh(), ex.solver().grid());
  CHECK((back.values - g.values).cwiseAbs().maxCoeff() == 0.0);
  {
    std::ofstream os(p);
    os << "t,node_1\n0,1\n";
  }
  CHECK_THROWS_AS(read_series_csv(p.string(), ex.mesh(), ex.solver().grid()), ConfigError);
}

TEST_CASE("forward regression at nx = 20") {
  ExperimentConfig c;
  const Experiment ex(c);
  const ObservationSeries clean = ex.solver().apply_W(ex.phantom(), ex.configured_design());
  const double max_abs = clean.values.cwiseAbs().maxCoeff();
  CHECK(max_abs == doctest::Approx(403.81907851416207).epsilon(1e-2));
  CHECK(max_abs == doctest::Approx(403.81907851416207).epsilon(1e-9));
}

TEST_CASE("eig command") {
  const fs::path dir = scratch_dir("eig");
  ExperimentConfig c = small_config(dir);
  const EigOutput bl = cmd_eig(c);
  CHECK(bl.lambda[0] == doctest::Approx(1.0).epsilon(1e-9));
  c.prior.kind = "ornstein_uhlenbeck";
  const EigOutput ou = cmd_eig(c);
  CHECK(ou.coefficient_trace == doctest::Approx(121 * 0.01).epsilon(1e-12));
  CHECK(ou.full_trace == doctest::Approx(ou.lambda.sum()).epsilon(1e-12));
  std::istringstream is(slurp(dir / "eigenvalues.csv"));
  std::string line;
  std::getline(is, line);
  CHECK(line == "index,lambda");
  double prev = 1e300;
  int rows = 0;
  while (std::getline(is, line)) {
    const double v = std::stod(line.substr(line.find(',') + 1));
    CHECK(v <= prev);
    prev = v;
    ++rows;
  }
  CHECK(rows == 121);
}

TEST_CASE("zero phantom gives zero observations") {
  ExperimentConfig c = small_config(scratch_dir("zero"));
  c.phantom.shapes.clear();
  const ForwardOutput out = cmd_forward(c);
  CHECK(out.clean.values.cwiseAbs().maxCoeff() == 0.0);
  const std::string csv = slurp(fs::path(c.io.outdir) / "obs_clean.csv");
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    while (std::getline(ls, cell, ',')) CHECK(std::stod(cell) == 0.0);
  }
  // no phantom, no error reported
  CHECK_FALSE(cmd_reconstruct(c).rel_error.has_value());
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch_dir("exit");
  CHECK(run("") == 2);
  CHECK(run("bogus") == 2);
  CHECK(run("forward --config " + (dir / "missing.json").string()) == 2);
  CHECK(run("forward --config " + write_config(dir, R"({"mesh": {"nx": 10}, "extra": 1})").string()) == 2);
  CHECK(run("forward --config " + write_config(dir, R"({"time": {"nt": 7}})").string()) == 2);
  CHECK(run("forward --config " + write_config(dir, "{not json").string()) == 2);
  const std::string blowup = R"({"mesh": {"nx": 10}, "time": {"nt": 20}, "design": {"I": 1e300},
    "phantom": {"shapes": [{"kind": "disk", "center": [0, 0], "size": [0.3], "value": 1e300}]}})";
  CHECK(run("forward --out " + (dir / "o").string() + " --config " + write_config(dir, blowup).string()) == 3);
  const std::string ok = R"({"mesh": {"nx": 10}, "time": {"nt": 100}, "io": {"emit_images": false}})";
  CHECK(run("forward --seed 5 --out " + (dir / "o").string() + " --config " + write_config(dir, ok).string()) == 0);
  CHECK(fs::exists(dir / "o" / "obs_noisy.csv"));
  CHECK(slurp(dir / "o" / "forward.json").find("\"seed\":5") != std::string::npos);
  CHECK(run("reconstruct --obs " + (dir / "o" / "obs_noisy.csv").string() + " --out " + (dir / "r").string() +
            " --config " + write_config(dir, ok).string()) == 0);
  CHECK(fs::exists(dir / "r" / "stats.jsonl"));
  CHECK(run("reconstruct --obs " + (dir / "o" / "forward.json").string() + " --out " + (dir / "r").string() +
            " --config " + write_config(dir, ok).string()) == 2);
}

TEST_CASE("image output") {
  ExperimentConfig c = small_config(scratch_dir("img"));
  c.io.emit_images = true;
  (void)cmd_forward(c);
  const std::string pgm = slurp(fs::path(c.io.outdir) / "phantom.pgm");
  CHECK(pgm.rfind("P5\n11 11\n255\n", 0) == 0);
  CHECK(pgm.size() == std::string("P5\n11 11\n255\n").size() + 121);
  CHECK(slurp(fs::path(c.io.outdir) / "phantom.pgm.txt").find("max 1") != std::string::npos);
}
