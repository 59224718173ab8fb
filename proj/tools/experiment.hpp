#pragma once

// Experiment configuration for the command-line tool: a single JSON
// document, unknown keys rejected.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mlemsparse/model.hpp"

namespace mlemsparse::cli {

struct GridConfig {
  int nx = 64;
  int ny = 64;
  std::array<double, 2> spacing{1.0, 1.0};
};

struct DiracConfig {
  std::size_t detector = 0;
  /// Detector profile a_{i0}; must be a two-bumps profile with values in [0, 1].
  PhantomSpec profile;
  std::vector<long long> k_schedule{1, 10, 100, 1000, 10000, 100000};
};

struct MonteCarloConfig {
  /// Explicit detector rows on a 1 x r grid; empty means the configured
  /// projector and phantom.
  std::vector<std::vector<double>> rows;
  /// Ground-truth atom weights for explicit rows.
  std::vector<double> mu_real;
  std::vector<double> doses{0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0};
  std::uint64_t trials = 10000;
  /// Cone margin; computed by simplex search when unset.
  std::optional<double> epsilon;
  double grid_resolution = 0.01;
};

struct ExperimentConfig {
  GridConfig grid;
  ParallelBeamGeometry projector;
  PhantomSpec phantom;
  std::vector<double> doses{100.0, 10.0, 1.0, 0.1, 0.01};
  int iterations = 400;
  int record_every = 1;
  double percentile = 0.95;
  int check_every = 10;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  DiracConfig dirac;
  MonteCarloConfig montecarlo;

  ExperimentConfig();

  /// Throws ParameterError on the first invalid field.
  void validate() const;
};

nlohmann::ordered_json to_json(const ExperimentConfig& cfg);
/// Throws ParameterError on unknown keys or wrongly typed values.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Grid described by the configuration.
GridPtr make_grid(const GridConfig& g);

}  // namespace mlemsparse::cli
