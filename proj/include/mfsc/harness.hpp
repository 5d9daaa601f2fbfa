#pragma once

// Verification metrics and experiment orchestration shared by the CLI and tests.

#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "mfsc/config.hpp"
#include "mfsc/model.hpp"
#include "mfsc/pi_solver.hpp"
#include "mfsc/rl_solver.hpp"
#include "mfsc/simulator.hpp"

namespace mfsc {

/// Estimated solution of both Riccati equations. Kbar is the mean-field gain
/// of u = -K x - Kbar x^(N).
struct Estimates {
  SymMat P;
  Mat K;
  SymMat Lambda1;
  SymMat Pi;
  Mat Kbar;
  SymMat Lambda2;
};

/// Frobenius-relative errors ||map(est) - est|| / ||map(est)||. An entry is
/// empty when its map hits a singular inner matrix; `errors` says why.
struct ResidualReport {
  std::optional<double> relerr_P;
  std::optional<double> relerr_K;
  std::optional<double> relerr_L1;
  std::optional<double> relerr_Pi;
  std::optional<double> relerr_Kbar;
  std::optional<double> relerr_L2;
  std::vector<std::string> errors;

  /// Largest entry; +inf when any entry is missing.
  double max() const;
  bool within(double tol) const { return max() <= tol; }
};

ResidualReport residual_report(const SystemModel& model, const CostSpec& cost,
                               const Estimates& est);

struct CostEstimate {
  double per_agent_cost = 0.0;  // J_soc / N truncated at `horizon`
  int horizon = 0;
  int replications = 0;
  double std_error = 0.0;
  double tail_factor = 0.0;     // max closed-loop spectral radius ^ (2 * horizon)
  std::vector<double> samples;  // per-replication values, for paired comparisons
};

struct CostSetup {
  int N = 200;
  int horizon = 200;
  int replications = 50;
  std::uint64_t seed = 1;
  Vec x0_low;
  Vec x0_high;
};

/// Monte-Carlo social cost per agent under u_ik = -K x_ik - Kbar x^(N)_k.
/// Throws NotStabilizingError when either closed loop is not Schur.
CostEstimate social_cost_estimate(const SystemModel& model, const CostSpec& cost,
                                  const GainPair& gains, const CostSetup& setup);

Estimates estimates_from(const SolveReport& p_stage, const SolveReport& pi_stage);
Estimates estimates_from(const Algorithm1Result& result);

/// Model-based solve of both stages.
struct ModelBasedSolution {
  SolveReport p_stage;
  SolveReport pi_stage;
  Estimates estimates;
  ResidualReport residuals;
};

ModelBasedSolution model_based_solve(const ProblemConfig& config);

struct Campaign {
  Dataset dataset;
  Replication sample;  // first replication, for trajectory plots
  int aborted = 0;
};

/// Simulates the data-collection campaign described by the config.
Campaign collect(const ProblemConfig& config);

/// Data collection, model-free solve and verification in one run.
struct PipelineResult {
  Campaign campaign;
  Algorithm1Result solution;
  Estimates estimates;
  ResidualReport residuals;
  double rho_individual = 0.0;
  double rho_mean_field = 0.0;
  std::vector<Vec> mf_trajectory;
};

PipelineResult run_pipeline(const ProblemConfig& config, int mf_horizon = 60);

enum class ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kRank = 3,
  kIteration = 4,
  kVerification = 5,
};

/// Maps a library exception to the CLI exit code.
ExitCode exit_code_for(const std::exception& e);

}  // namespace mfsc
