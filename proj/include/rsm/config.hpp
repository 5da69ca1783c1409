#pragma once

#include "rsm/verifier.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rsm {

/// Everything a CLI run needs. Text form: one "key = value" per line, '#'
/// starts a comment, unknown keys are rejected.
struct RunConfig {
  std::string benchmark = "2d-system";
  std::string policy = "analytic";  // "analytic" or a weights file path
  std::vector<double> gain;         // analytic gain override, empty = default
  CertifyConfig certify;
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  // experiments
  std::string certificate;          // certificate path for analysis commands
  bool random_v = false;            // bound-experiment on an untrained V
  int bound_states = 100;
  int bound_mc_samples = 1000;
  std::vector<int> bound_ks{4, 8, 16, 32, 64};
  int sim_runs = 1000;
  std::vector<double> sim_x0;       // empty = centre of the first quadrant corner
  int sim_steps = 200;
  int sim_trajectories = 10;
  bool zero_noise = false;
  int contour_resolution = 101;
  std::vector<long long> tail_times{10, 50, 100, 500};

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Throws ConfigError ("line N: ...") naming the offending key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Canonical text form; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const RunConfig& cfg);

}  // namespace rsm
