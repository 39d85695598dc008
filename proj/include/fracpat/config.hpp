#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace fracpat {

/// Thrown for malformed or invalid experiment configurations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ShapeConfig {
  std::string kind = "disk";  // disk | rect
  std::array<double, 2> center{0.0, 0.0};
  /// disk: {radius}; rect: {width, height}
  std::vector<double> size{0.1};
  double value = 1.0;
};

struct ExperimentConfig {
  struct {
    int nx = 20;
  } mesh;
  struct {
    double T = 0.2;
    int nt = 0;  // 0 picks the smallest even nt with c dt <= h
  } time;
  struct {
    double alpha = 0.3;
    double r0 = 1e-4;
    double c = 300.0;
  } physics;
  struct {
    std::string kind = "bilaplacian";
    double gamma = 1.0;
    double delta = 8.0;
    double eta = 0.1;
    double ell = 0.1;
  } prior;
  struct {
    double sigma2 = 1e-2;
    std::uint64_t seed = 1;
  } noise;
  struct {
    double I = 100.0;
    std::vector<double> d{1.0, 0.0, 0.0, 0.0, 0.0};
    double omega = 314.15926535897932;
    int K = 5;
  } design;
  struct {
    int N = 0;  // 0 picks min(160, n/4)
    double tol = 1e-6;
    int maxit = 500;
    double h1_factor = 4.0;
    std::string h1_policy = "ball";
  } oed;
  struct {
    double cg_rtol = 1e-8;
    int cg_maxit = 200;
    std::string adjoint = "transpose";  // transpose | continuous
    bool smooth_data = false;
  } solver;
  struct {
    std::string outdir = "out";
    bool emit_images = true;
  } io;
  struct {
    std::vector<ShapeConfig> shapes;
  } phantom;

  ExperimentConfig();

  /// Throws ConfigError on any violated invariant.
  void validate() const;
  [[nodiscard]] int resolved_nt() const;
  [[nodiscard]] int resolved_N() const;
};

/// Parses a full or partial document over the defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

}  // namespace fracpat
