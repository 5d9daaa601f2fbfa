#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfsc/matalg.hpp"

namespace mfsc {

/// Agent dynamics x_{i,k+1} = A x_ik + G x^(N)_k + B u_ik + D w_ik, w ~ N(0, sigma2 I).
/// Known to the simulator and to verification code only.
struct SystemModel {
  Mat A;
  Mat G;
  Mat B;
  Mat D;
  double sigma2 = 0.0;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }

  /// Throws DimensionError / NonFiniteError / ConfigError.
  void validate() const;
};

/// Weights of the individual cost (x - Gamma x^(N))' Q (...) + u' R u.
/// Q and R are symmetric but not required to be definite.
class CostSpec {
 public:
  CostSpec() = default;
  CostSpec(SymMat q, SymMat r, Mat gamma);

  const SymMat& Q() const { return q_; }
  const SymMat& R() const { return r_; }
  const Mat& Gamma() const { return gamma_; }
  /// Gamma' Q Gamma - Q Gamma - Gamma' Q.
  const SymMat& QGamma() const { return qgamma_; }

  int n() const { return q_.dim(); }
  int m() const { return r_.dim(); }

 private:
  SymMat q_;
  SymMat r_;
  Mat gamma_;
  SymMat qgamma_;
};

/// Decentralized law u_ik = -K x_ik - Kbar x^(N)_k.
struct GainPair {
  Mat K;
  Mat Kbar;
};

SymMat make_qgamma(const SymMat& q, const Mat& gamma);

struct ClosedLoop {
  Mat individual;  // A - B K
  Mat mean_field;  // A + G - B (K + Kbar)
};

ClosedLoop closed_loop(const SystemModel& model, const GainPair& gains);

void check_dimensions(const SystemModel& model, const CostSpec& cost);
void check_gain_shape(const SystemModel& model, const Mat& gain, const char* name);

enum class Verdict { kTrue, kFalse, kNotApplicable };
const char* to_string(Verdict v);

/// Model-known diagnostic of the standing assumptions. Not used by the
/// data-driven solver.
struct AssumptionReport {
  bool stabilizable_A_B = false;
  bool stabilizable_AG_B = false;
  Verdict detectable_A_sqrtQ = Verdict::kNotApplicable;
  Verdict detectable_AG_sqrtQ_IGamma = Verdict::kNotApplicable;
  // Filled only when a candidate (P, Pi) is supplied.
  std::optional<bool> h_positive;
  std::optional<bool> hbar_positive;
  std::optional<double> h_min_eig;
  std::optional<double> hbar_min_eig;
  std::vector<std::string> notes;
};

struct InteriorCandidate {
  SymMat P;
  SymMat Pi;
};

AssumptionReport check_assumptions(const SystemModel& model, const CostSpec& cost,
                                   const std::optional<InteriorCandidate>& candidate = {});

/// PBH test: rank [A - lambda I, B] = n for every eigenvalue with |lambda| >= 1.
bool is_stabilizable(const Mat& a, const Mat& b);
/// Dual PBH test: rank [A - lambda I; C] = n for every eigenvalue with |lambda| >= 1.
bool is_detectable(const Mat& a, const Mat& c);

/// Symmetric square root through the eigendecomposition; nullopt when
/// min eigenvalue < -1e-10.
std::optional<Mat> sqrt_psd(const SymMat& q);

/// The block matrix H(P) (or Hbar(Pi) when called with A + G and Q + QGamma).
SymMat h_block(const Mat& a, const Mat& b, const SymMat& q, const SymMat& r, const SymMat& p);

}  // namespace mfsc
