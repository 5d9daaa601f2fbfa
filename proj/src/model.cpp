#include "mfsc/model.hpp"

#include <cmath>
#include <complex>
#include <string>
#include <utility>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "mfsc/errors.hpp"

namespace mfsc {

namespace {

using CMat = Eigen::MatrixXcd;

constexpr double kUnitCircleTol = 1e-9;
constexpr double kPbhRankTol = 1e-9;

int complex_rank(const CMat& m) {
  Eigen::JacobiSVD<CMat> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  return static_cast<int>((sv.array() > kPbhRankTol * sv(0)).count());
}

// Eigenvalues of A on or outside the unit circle.
std::vector<std::complex<double>> unstable_eigenvalues(const Mat& a) {
  Eigen::EigenSolver<Mat> es(a, false);
  if (es.info() != Eigen::Success) throw NonConvergenceError("PBH test: eigensolver failed");
  std::vector<std::complex<double>> out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (std::abs(es.eigenvalues()(i)) >= 1.0 - kUnitCircleTol) out.push_back(es.eigenvalues()(i));
  }
  return out;
}

}  // namespace

void SystemModel::validate() const {
  const auto n = A.rows();
  if (n == 0 || A.cols() != n) throw DimensionError("model: A must be square and non-empty");
  if (G.rows() != n || G.cols() != n) throw DimensionError("model: G must be n x n");
  if (B.rows() != n || B.cols() == 0) throw DimensionError("model: B must be n x m, m >= 1");
  if (D.rows() != n || D.cols() != n) throw DimensionError("model: D must be n x n");
  if (!all_finite(A) || !all_finite(G) || !all_finite(B) || !all_finite(D) ||
      !std::isfinite(sigma2)) {
    throw NonFiniteError("model: non-finite coefficient");
  }
  if (sigma2 < 0.0) throw ConfigError("model: sigma2 must be nonnegative");
}

CostSpec::CostSpec(SymMat q, SymMat r, Mat gamma)
    : q_(std::move(q)), r_(std::move(r)), gamma_(std::move(gamma)) {
  if (gamma_.rows() != q_.dim() || gamma_.cols() != q_.dim()) {
    throw DimensionError("cost: Gamma must be n x n");
  }
  if (!all_finite(gamma_)) throw NonFiniteError("cost: non-finite Gamma");
  qgamma_ = make_qgamma(q_, gamma_);
}

SymMat make_qgamma(const SymMat& q, const Mat& gamma) {
  if (gamma.rows() != q.dim() || gamma.cols() != q.dim()) {
    throw DimensionError("make_qgamma: Gamma and Q dimensions differ");
  }
  const Mat& qf = q.full();
  const Mat qg = gamma.transpose() * qf * gamma - qf * gamma - gamma.transpose() * qf;
  return SymMat::from_full(qg, /*symmetrize=*/true);
}

ClosedLoop closed_loop(const SystemModel& model, const GainPair& gains) {
  check_gain_shape(model, gains.K, "K");
  check_gain_shape(model, gains.Kbar, "Kbar");
  return {model.A - model.B * gains.K, model.A + model.G - model.B * (gains.K + gains.Kbar)};
}

void check_dimensions(const SystemModel& model, const CostSpec& cost) {
  model.validate();
  if (cost.n() != model.n()) throw DimensionError("Q dimension differs from state dimension");
  if (cost.m() != model.m()) throw DimensionError("R dimension differs from input dimension");
}

void check_gain_shape(const SystemModel& model, const Mat& gain, const char* name) {
  if (gain.rows() != model.m() || gain.cols() != model.n()) {
    throw DimensionError(std::string(name) + " must be m x n (" + std::to_string(model.m()) +
                         "x" + std::to_string(model.n()) + ")");
  }
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kTrue:
      return "true";
    case Verdict::kFalse:
      return "false";
    case Verdict::kNotApplicable:
      return "not-applicable";
  }
  return "?";
}

bool is_stabilizable(const Mat& a, const Mat& b) {
  const auto n = a.rows();
  for (const auto& lambda : unstable_eigenvalues(a)) {
    CMat pbh(n, n + b.cols());
    pbh.leftCols(n) = a.cast<std::complex<double>>() - lambda * CMat::Identity(n, n);
    pbh.rightCols(b.cols()) = b.cast<std::complex<double>>();
    if (complex_rank(pbh) < n) return false;
  }
  return true;
}

bool is_detectable(const Mat& a, const Mat& c) {
  return is_stabilizable(a.transpose(), c.transpose());
}

std::optional<Mat> sqrt_psd(const SymMat& q) {
  Eigen::SelfAdjointEigenSolver<Mat> es(q.full());
  if (es.info() != Eigen::Success) throw NonConvergenceError("sqrt_psd: eigensolver failed");
  if (es.eigenvalues().minCoeff() < -1e-10) return std::nullopt;
  const Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

SymMat h_block(const Mat& a, const Mat& b, const SymMat& q, const SymMat& r, const SymMat& p) {
  const auto n = a.rows();
  const auto m = b.cols();
  const Mat& pf = p.full();
  Mat h(n + m, n + m);
  h.topLeftCorner(n, n) = a.transpose() * pf * a - pf + q.full();
  h.topRightCorner(n, m) = a.transpose() * pf * b;
  h.bottomLeftCorner(m, n) = b.transpose() * pf * a;
  h.bottomRightCorner(m, m) = r.full() + b.transpose() * pf * b;
  return SymMat::from_full(h, true);
}

AssumptionReport check_assumptions(const SystemModel& model, const CostSpec& cost,
                                   const std::optional<InteriorCandidate>& candidate) {
  check_dimensions(model, cost);
  AssumptionReport rep;
  const Mat ag = model.A + model.G;
  rep.stabilizable_A_B = is_stabilizable(model.A, model.B);
  rep.stabilizable_AG_B = is_stabilizable(ag, model.B);

  if (auto root = sqrt_psd(cost.Q())) {
    const Mat id = Mat::Identity(model.n(), model.n());
    rep.detectable_A_sqrtQ = is_detectable(model.A, *root) ? Verdict::kTrue : Verdict::kFalse;
    rep.detectable_AG_sqrtQ_IGamma =
        is_detectable(ag, *root * (id - cost.Gamma())) ? Verdict::kTrue : Verdict::kFalse;
  } else {
    rep.notes.emplace_back("Q is indefinite; detectability checks are not applicable");
  }

  if (candidate) {
    if (candidate->P.dim() != model.n() || candidate->Pi.dim() != model.n()) {
      throw DimensionError("check_assumptions: candidate dimension differs from n");
    }
    const SymMat qq = SymMat::from_full(cost.Q().full() + cost.QGamma().full(), true);
    const double h = min_eig_sym(h_block(model.A, model.B, cost.Q(), cost.R(), candidate->P));
    const double hb = min_eig_sym(h_block(ag, model.B, qq, cost.R(), candidate->Pi));
    rep.h_min_eig = h;
    rep.hbar_min_eig = hb;
    rep.h_positive = h > 0.0;
    rep.hbar_positive = hb > 0.0;
  }
  return rep;
}

}  // namespace mfsc
