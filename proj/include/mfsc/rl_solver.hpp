#pragma once

// Data-driven policy iteration from moment trajectories. Uses Q, R and Gamma;
// never touches A, G, B, D or sigma2.

#include <algorithm>
#include <string>
#include <vector>

#include "mfsc/errors.hpp"
#include "mfsc/matalg.hpp"
#include "mfsc/model.hpp"
#include "mfsc/simulator.hpp"

namespace mfsc {

/// Kronecker data matrices, one row per time step k = 0..l-2.
/// Row k of Ixx is dx_k' (x) dx_k; Ixx_next holds the same for k + 1.
/// Ixu rows are dx_k' (x) du_k, so that Ixu * vec(Kc) = du_k' Kc dx_k for
/// column-stacked vec. The bar-matrices are built from xbar/ubar alike.
struct DataMoments {
  int n = 0;
  int m = 0;
  Mat Ixx, Ixx_next, Ixu, Iuu;
  Mat Bxx, Bxx_next, Bxu, Buu;

  int rows() const { return static_cast<int>(Ixx.rows()); }
};

enum class Stage { kIndividual = 1, kMeanField = 2 };

struct RankVerdict {
  int rank = 0;
  int required = 0;
  bool ok = false;
  double sigma_min_ratio = 0.0;
};

/// Solution of one least-squares policy-iteration step.
struct LsqIterate {
  SymMat value;   // P_k or Pi_k
  Mat kcal;       // (R + Lambda_k) K_{k+1}, or (R + Lambda_k)(K + Kbar_{k+1})
  SymMat lambda;  // estimate of B' P_k B or B' Pi_k B
  Mat gain_next;  // K_{k+1}, or Kbar_{k+1}
  double residual = 0.0;
};

constexpr double kRankTol = 1e-8;

/// Count of unknowns n(n+1)/2 + nm + m(m+1)/2.
int required_rank(int n, int m);

DataMoments build_moments_matrices(const MomentTrajectories& moments);

RankVerdict rank_check(const DataMoments& data, Stage stage);

/// Stage-1 regression matrix [Ixx - Ixx', 2 Ixu + 2 Ixx (I (x) K'), Iuu - Ixx (K' (x) K')]
/// with the symmetric columns of the first and last blocks folded (svec unknowns).
Mat regression_matrix(const Mat& xx, const Mat& xx_next, const Mat& xu, const Mat& uu,
                      const Mat& gain);

LsqIterate lsq_step_p(const DataMoments& data, const Mat& gain, const SymMat& q, const SymMat& r);

LsqIterate lsq_step_pi(const DataMoments& data, const Mat& khat, const Mat& kbar, const SymMat& q,
                       const SymMat& r, const SymMat& qgamma);

struct StageReport {
  std::vector<LsqIterate> iterates;
  std::vector<Mat> gains;  // policy evaluated at each iterate
  std::vector<double> gain_changes;
  bool converged = false;
  int iterations() const { return static_cast<int>(iterates.size()); }
};

struct Algorithm1Result {
  SymMat Phat;
  Mat Khat;
  SymMat Lambda1;
  SymMat Pihat;
  Mat Kbarhat;
  SymMat Lambda2;
  RankVerdict rank1;
  RankVerdict rank2;
  StageReport stage1;
  StageReport stage2;
};

/// Thrown when the rank conditions fail; run_algorithm1 refuses to iterate.
class RankConditionError : public RankDeficientError {
 public:
  RankConditionError(const std::string& what, RankVerdict v1, RankVerdict v2)
      : RankDeficientError(what, std::min(v1.rank, v2.rank), v1.required), v1_(v1), v2_(v2) {}
  const RankVerdict& stage1() const { return v1_; }
  const RankVerdict& stage2() const { return v2_; }

 private:
  RankVerdict v1_;
  RankVerdict v2_;
};

Algorithm1Result run_algorithm1(const MomentTrajectories& dataset, const Mat& K0, const Mat& kbar0,
                                const CostSpec& cost, double epsilon, int max_iter = 50);

}  // namespace mfsc
