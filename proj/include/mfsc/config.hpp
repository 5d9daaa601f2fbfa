#pragma once

// Problem definition file.
//
// Plain text, one `key = value` per line; `#` starts a comment. Matrices are
// listed row-major as numbers separated by whitespace, commas or semicolons
// (semicolons may mark row ends for readability). A value may continue over
// several lines by ending a line with a backslash.
//
// Required: n, m, N, A, G, B, D, sigma2, Q, R, Gamma, x0_low, x0_high, K0,
//           Kbar0, epsilon, seed.
// Optional: l (50), M (100), max_iter (50), explore_terms (100),
//           explore_freq_low (-100), explore_freq_high (100),
//           explore_mode (time | constant), verify_tol (0.1).

#include <cstdint>
#include <string>

#include "mfsc/model.hpp"
#include "mfsc/simulator.hpp"

namespace mfsc {

struct ProblemConfig {
  SystemModel model;
  CostSpec cost;
  int N = 200;
  Vec x0_low;
  Vec x0_high;
  Mat K0;
  Mat Kbar0;
  double epsilon = 1e-4;
  std::uint64_t seed = 1;

  int l = 50;
  int M = 100;
  int max_iter = 50;
  int explore_terms = 100;
  double explore_freq_low = -100.0;
  double explore_freq_high = 100.0;
  ExplorationSpec::Mode explore_mode = ExplorationSpec::Mode::kTimeIndexed;
  double verify_tol = 0.1;

  /// Mean of the initial-state distribution.
  Vec x0_mean() const { return 0.5 * (x0_low + x0_high); }

  RolloutConfig rollout() const;
  ExplorationSpec exploration() const;
};

/// Throws ConfigError with the offending key or line.
ProblemConfig parse_config(const std::string& text);
ProblemConfig load_config(const std::string& path);

/// FNV-1a 64-bit hash, hex encoded.
std::string content_hash(const std::string& text);

std::string read_file(const std::string& path);

}  // namespace mfsc
