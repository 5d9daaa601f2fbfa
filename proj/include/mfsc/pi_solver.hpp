#pragma once

// Model-based policy iteration for the two coupled Riccati equations.

#include <string>
#include <vector>

#include "mfsc/matalg.hpp"
#include "mfsc/model.hpp"

namespace mfsc {

/// One policy-iteration iterate.
struct RiccatiIterate {
  int iter = 0;
  SymMat value;   // P_k or Pi_k
  Mat gain;       // policy evaluated: K_k, or K + Kbar_k in the mean-field stage
  Mat next_gain;  // K_{k+1}, or Kbar_{k+1} in the mean-field stage
  SymMat lambda;  // B' P_k B or B' Pi_k B
};

struct SolveReport {
  std::vector<RiccatiIterate> iterates;
  bool converged = false;
  std::vector<double> residual_history;  // relative ARE residual of each value iterate
  std::vector<double> gain_changes;      // ||next_gain - gain_k||_F
  std::vector<double> spectral_radii;    // closed loop under the evaluated policy
  std::vector<double> inner_min_abs_eig; // min |eig(R + Lambda_k)|
  std::vector<Inertia> inner_inertia;

  const RiccatiIterate& last() const { return iterates.back(); }
  int iterations() const { return static_cast<int>(iterates.size()); }
};

/// Result of a single evaluation/improvement step.
struct PiStep {
  SymMat value;
  Mat next_gain;
  SymMat lambda;
  double spectral_radius = 0.0;
};

constexpr int kDefaultMaxIter = 50;

/// P_k = A_k' P_k A_k + K_k' R K_k + Q, K_{k+1} = (R + B'P_kB)^{-1} B'P_k A.
PiStep pi_step_p(const SystemModel& model, const CostSpec& cost, const Mat& gain);

/// Mean-field stage: evaluates K + Kbar_k on (A + G, Q + QGamma) and returns
/// Kbar_{k+1} = (R + B'Pi_kB)^{-1} B'Pi_k (A + G) - K.
PiStep pi_step_pi(const SystemModel& model, const CostSpec& cost, const Mat& K, const Mat& kbar);

/// Iterates pi_step_p from K0 until ||K_{k+1} - K_k||_F <= epsilon.
/// Throws MaxIterExceededError when max_iter steps do not suffice.
SolveReport solve_p(const SystemModel& model, const CostSpec& cost, const Mat& K0, double epsilon,
                    int max_iter = kDefaultMaxIter);

SolveReport solve_pi(const SystemModel& model, const CostSpec& cost, const Mat& K, const Mat& kbar0,
                     double epsilon, int max_iter = kDefaultMaxIter);

/// Converged gain of a report (K_{k+1} of the last step).
inline const Mat& final_gain(const SolveReport& r) { return r.last().next_gain; }
inline const SymMat& final_value(const SolveReport& r) { return r.last().value; }

/// Riccati operator A'PA - A'PB(R + B'PB)^{-1}B'PA + Q. Throws
/// SingularInnerMatrixError when R + B'PB is singular.
SymMat riccati_map(const Mat& a, const Mat& b, const SymMat& q, const SymMat& r, const SymMat& p);

/// (R + B'PB)^{-1} B'P A.
Mat riccati_gain(const Mat& a, const Mat& b, const SymMat& r, const SymMat& p);

/// ||P - Ric(P)||_F / ||P||_F.
double are_relative_residual(const Mat& a, const Mat& b, const SymMat& q, const SymMat& r,
                             const SymMat& p);

/// x_{k+1} = (A + G - B(K + Kbar)) x_k for k < T; returns T + 1 states.
std::vector<Vec> mf_trajectory(const SystemModel& model, const GainPair& gains, const Vec& xbar0,
                               int horizon);

/// Model-known helper for test setup: a stabilizing gain for (A, B) from the
/// Riccati difference recursion with unit weights.
Mat find_stabilizer(const Mat& a, const Mat& b, int max_iter = 10000);

}  // namespace mfsc
