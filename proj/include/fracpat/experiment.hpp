#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "fracpat/config.hpp"
#include "fracpat/map.hpp"
#include "fracpat/oed.hpp"

namespace fracpat {

/// Nodal phantom; later shapes overwrite earlier ones.
Field build_phantom(const Mesh& mesh, const std::vector<ShapeConfig>& shapes);

void write_series_csv(std::ostream& os, const ObservationSeries& g, const Mesh& mesh, const TimeGrid& grid);
ObservationSeries read_series_csv(const std::string& path, const Mesh& mesh, const TimeGrid& grid);
void write_field_csv(std::ostream& os, const Field& a, const Mesh& mesh);
/// 8-bit min-max scaled image, top row at y = 1, plus `<path>.txt` with the scale.
void write_pgm(const std::string& path, const Field& a, const Mesh& mesh);

/// Everything derived from one configuration.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg);

  [[nodiscard]] const ExperimentConfig& config() const { return cfg_; }
  [[nodiscard]] const Mesh& mesh() const { return mesh_; }
  [[nodiscard]] const FemMatrices& fem() const { return fem_; }
  [[nodiscard]] const WaveSolver& solver() const { return *solver_; }
  [[nodiscard]] const Prior& prior() const { return *prior_; }
  [[nodiscard]] const Field& phantom() const { return phantom_; }

  [[nodiscard]] IntensityDesign design(double I, const std::vector<double>& d) const;
  [[nodiscard]] IntensityDesign configured_design() const;
  /// noise-free and noisy data for the phantom under `design`
  [[nodiscard]] std::pair<ObservationSeries, ObservationSeries> observe(const IntensityDesign& design) const;
  [[nodiscard]] MapResult reconstruct(const ObservationSeries& obs, const IntensityDesign& design) const;
  [[nodiscard]] double phantom_error(const Field& a) const;

 private:
  ExperimentConfig cfg_;
  Mesh mesh_;
  FemMatrices fem_;
  std::unique_ptr<WaveSolver> solver_;
  std::unique_ptr<Prior> prior_;
  Field phantom_;
};

struct ForwardOutput {
  ObservationSeries clean;
  ObservationSeries noisy;
  double max_abs = 0.0;
};

struct ReconstructOutput {
  MapResult map;
  std::optional<double> rel_error;
};

struct DesignScore {
  std::string label;
  double I = 0.0;
  std::vector<double> d;
  double phi = 0.0;
  double rel_error = 0.0;
  int iterations = 0;
};

struct OedOutput {
  DesignResult result;
  DesignScore initial;
  DesignScore optimal;
  DesignScore max_frequency;
};

struct EigOutput {
  Eigen::VectorXd lambda;
  double full_trace = 0.0;
  double coefficient_trace = 0.0;
};

/// Each command writes its artifacts under cfg.io.outdir.
ForwardOutput cmd_forward(const ExperimentConfig& cfg);
ReconstructOutput cmd_reconstruct(const ExperimentConfig& cfg, const std::string& obs_path = "");
OedOutput cmd_oed(const ExperimentConfig& cfg, const std::string& gram_manifest = "");
EigOutput cmd_eig(const ExperimentConfig& cfg);

}  // namespace fracpat
