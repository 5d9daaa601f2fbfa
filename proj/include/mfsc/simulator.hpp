#pragma once

// N-agent stochastic population, behavior-policy rollouts and moment estimation.

#include <cstdint>
#include <string>
#include <vector>

#include "mfsc/matalg.hpp"
#include "mfsc/model.hpp"

namespace mfsc {

/// Deterministic sum-of-sinusoids exploration xi_ik = sum_j sin(w_i^j * k).
struct ExplorationSpec {
  enum class Mode { kTimeIndexed, kConstant };

  int n_terms = 100;
  double freq_low = -100.0;
  double freq_high = 100.0;
  Mode mode = Mode::kTimeIndexed;
  // frequencies[i] holds n_terms * m values: term j of input channel c at c * n_terms + j.
  std::vector<std::vector<double>> frequencies;

  /// Draws per-agent frequencies uniformly from [freq_low, freq_high].
  static ExplorationSpec draw(int agents, int inputs, int n_terms, double freq_low,
                              double freq_high, std::uint64_t seed,
                              Mode mode = Mode::kTimeIndexed);

  /// Zero exploration for `agents` agents.
  static ExplorationSpec none(int agents);

  int agents() const { return static_cast<int>(frequencies.size()); }
  bool is_zero() const { return n_terms == 0; }

  /// Exploration input of agent i at time step k.
  Vec value(int agent, int k, int inputs) const;
};

struct RolloutConfig {
  int N = 200;      // agents
  int l = 50;       // retained time steps k = 0..l-1
  int M = 100;      // Monte-Carlo replications
  std::uint64_t seed = 1;
  Mat K0;           // behavior gain: u = -K0 x + xi
  Vec x0_low;       // uniform initial-state box (bounds may be given in either order)
  Vec x0_high;

  void validate(const SystemModel& model) const;
  /// l - 1 >= n(n+1)/2 + nm + m(m+1)/2.
  bool horizon_sufficient(int n, int m) const;
};

/// l x n (or l x m) trajectories of one replication.
struct Replication {
  Mat x1;
  Mat x2;
  Mat u1;
  Mat u2;
  Mat xbar;  // population average state
  Mat ubar;  // population average input
};

struct RawTrajectories {
  std::vector<Replication> replications;
  int aborted = 0;  // replications dropped after a non-finite state
};

/// Monte-Carlo estimates of dx = E[x_1 - x_2], du, xbar, ubar.
struct MomentTrajectories {
  Mat dx;    // l x n
  Mat du;    // l x m
  Mat xbar;  // l x n
  Mat ubar;  // l x m

  int l() const { return static_cast<int>(dx.rows()); }
  int n() const { return static_cast<int>(dx.cols()); }
  int m() const { return static_cast<int>(du.cols()); }
  void validate() const;
};

/// Per-replication RNG seed derived from the campaign seed.
std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t replication);

RawTrajectories rollout_population(const SystemModel& model, const RolloutConfig& config,
                                   const ExplorationSpec& exploration);

MomentTrajectories estimate_moments(const RawTrajectories& raw);

/// Noiseless expectation dynamics under the behavior law, propagated exactly:
/// dx+ = (A - B K0) dx + B (xi_1 - xi_2), xbar+ = (A + G - B K0) xbar + B mean_i(xi_i).
MomentTrajectories propagate_expected_moments(const SystemModel& model, const Mat& K0,
                                              const ExplorationSpec& exploration, const Vec& dx0,
                                              const Vec& xbar0, int l);

struct DatasetMeta {
  std::uint64_t seed = 0;
  int N = 0;
  int M = 0;
  int l = 0;
  int n = 0;
  int m = 0;
  Mat K0;
  std::string config_hash;  // empty when unknown
};

struct Dataset {
  MomentTrajectories moments;
  DatasetMeta meta;
};

/// Writes `path` (CSV) and `path + ".meta"` (key = value).
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

std::string meta_path(const std::string& dataset_path);

}  // namespace mfsc
