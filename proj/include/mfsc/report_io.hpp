#pragma once

// Text serializations of solver output: CSV tables, JSON results files and the
// run manifest. All numbers are written with 17 significant digits.

#include <string>
#include <vector>

#include "mfsc/harness.hpp"

namespace mfsc {

std::string format_number(double v);

/// One row per policy-iteration iterate.
std::string solve_report_csv(const SolveReport& report);

/// One row per least-squares iterate of a model-free stage.
std::string stage_report_csv(const StageReport& report);

/// States and inputs of agents 1 and 2 and of the population average.
std::string replication_csv(const Replication& rep);

std::string mf_trajectory_csv(const std::vector<Vec>& traj);

std::string residuals_json(const ResidualReport& rep);

struct ResultsHeader {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string source;  // "model-based" or "model-free"
};

/// Results file: estimates plus residual/rank diagnostics when given.
std::string estimates_json(const ResultsHeader& header, const Estimates& est,
                           const Algorithm1Result* mf = nullptr,
                           const ModelBasedSolution* mb = nullptr);
Estimates estimates_from_json(const std::string& text);

/// Run manifest for the pipeline: key = value lines and [section] CSV tables.
/// Contains no timestamps, so equal inputs give byte-identical output.
std::string pipeline_manifest(const ProblemConfig& config, const std::string& config_hash,
                              const PipelineResult& result);

void write_text(const std::string& path, const std::string& text);

}  // namespace mfsc
