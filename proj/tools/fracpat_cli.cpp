#include <CLI11.hpp>

#include <iostream>

#include "fracpat/experiment.hpp"
#include "fracpat/format.hpp"

using namespace fracpat;

int main(int argc, char** argv) {
  CLI::App app{"Fractionally damped photoacoustic reconstruction and illumination design"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string outdir;
  std::string gram_path;
  std::string obs_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "noise seed (overrides noise.seed)");
    sub->add_option("--out", outdir, "output directory (overrides io.outdir)");
  };
  CLI::App* forward = app.add_subcommand("forward", "simulate clean and noisy observations of the phantom");
  CLI::App* reconstruct = app.add_subcommand("reconstruct", "MAP estimate from observations");
  CLI::App* oed = app.add_subcommand("oed", "optimize the illumination design");
  CLI::App* eig = app.add_subcommand("eig", "export the prior eigenvalues");
  for (CLI::App* sub : {forward, reconstruct, oed, eig}) add_common(sub);
  reconstruct->add_option("--obs", obs_path, "observation CSV (default: simulate)")->check(CLI::ExistingFile);
  oed->add_option("--gram", gram_path, "Gram manifest written by a previous oed run")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    bool seed_given = false;
    for (CLI::App* sub : {forward, reconstruct, oed, eig}) seed_given = seed_given || (sub->parsed() && sub->count("--seed"));
    if (seed_given) cfg.noise.seed = seed;
    if (!outdir.empty()) cfg.io.outdir = outdir;
    cfg.validate();

    if (forward->parsed()) {
      const ForwardOutput r = cmd_forward(cfg);
      std::cout << "forward: max |p| = " << fmt_double(r.max_abs) << ", seed " << cfg.noise.seed << "\n";
    } else if (reconstruct->parsed()) {
      const ReconstructOutput r = cmd_reconstruct(cfg, obs_path);
      std::cout << "reconstruct: " << r.map.stats.iterations << " CG iterations, residual "
                << fmt_double(r.map.stats.residual) << (r.map.stats.converged ? "" : " (not converged)");
      if (r.rel_error) std::cout << ", rel_error " << fmt_double(*r.rel_error);
      std::cout << "\n";
    } else if (oed->parsed()) {
      const OedOutput r = cmd_oed(cfg, gram_path);
      std::cout << "oed: phi " << fmt_double(r.result.phi0) << " -> " << fmt_double(r.result.phi) << " at I = "
                << fmt_double(r.result.I) << "\n";
      for (const DesignScore* s : {&r.initial, &r.optimal, &r.max_frequency}) {
        std::cout << "  " << s->label << ": rel_error " << fmt_double(s->rel_error) << "\n";
      }
    } else if (eig->parsed()) {
      const EigOutput r = cmd_eig(cfg);
      std::cout << "eig: n = " << r.lambda.size() << ", lambda_1 = " << fmt_double(r.lambda[0]) << ", trace "
                << fmt_double(r.full_trace) << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "solver failure";
    if (e.step() >= 0) std::cerr << " at step " << e.step();
    std::cerr << ": " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
