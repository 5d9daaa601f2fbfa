#include "mfsc/rl_solver.hpp"

#include <cmath>
#include <string>

#include "mfsc/errors.hpp"

namespace mfsc {

namespace {

constexpr double kLsqRankTol = 1e-10;
constexpr double kInvertTol = 1e-12;
constexpr double kDivergenceBound = 1e8;

// One Kronecker row per time step: out.row(k) = vec(b_k a_k')', i.e. a_k' (x) b_k'.
Mat kron_rows(const Mat& a, const Mat& b, int first, int count) {
  const auto na = a.cols();
  const auto nb = b.cols();
  Mat out(count, na * nb);
  for (int k = 0; k < count; ++k)
    for (Eigen::Index i = 0; i < na; ++i)
      for (Eigen::Index j = 0; j < nb; ++j) out(k, i * nb + j) = a(first + k, i) * b(first + k, j);
  return out;
}

Mat stacked_data(const Mat& xx, const Mat& xu, const Mat& uu, int n, int m) {
  Mat out(xx.rows(), packed_size(n) + n * m + packed_size(m));
  out << xx * duplication_matrix(n), xu, uu * duplication_matrix(m);
  return out;
}

struct Unknowns {
  SymMat value;
  Mat kcal;
  SymMat lambda;
};

Unknowns unpack(const Vec& theta, int n, int m) {
  const int np = packed_size(n);
  const int mp = packed_size(m);
  return {SymMat::from_packed(theta.segment(0, np)),
          unvec(theta.segment(np, n * m), m, n),
          SymMat::from_packed(theta.segment(np + n * m, mp))};
}

// Solves the regression for the policy `gain` with stage weight q_stage.
LsqIterate solve_step(const Mat& xx, const Mat& xx_next, const Mat& xu, const Mat& uu, int n,
                      int m, const Mat& gain, const SymMat& q_stage, const SymMat& r) {
  if (gain.rows() != m || gain.cols() != n) throw DimensionError("lsq step: gain must be m x n");
  if (q_stage.dim() != n || r.dim() != m) throw DimensionError("lsq step: Q/R dimension mismatch");
  const Mat a = regression_matrix(xx, xx_next, xu, uu, gain);
  const int required = required_rank(n, m);
  if (a.rows() < required) {
    throw RankDeficientError("lsq step: " + std::to_string(a.rows()) + " data rows < " +
                                 std::to_string(required) + " unknowns",
                             numerical_rank(a, kLsqRankTol), required);
  }
  const Vec b = xx * vec(q_stage.full());
  const LsqResult sol = lsq_solve(a, b, kLsqRankTol);
  Unknowns u = unpack(sol.x, n, m);

  const Mat inner = r.full() + u.lambda.full();
  if (!is_invertible(inner, kInvertTol, std::max(r.full().norm(), u.lambda.full().norm()))) {
    throw SingularInnerMatrixError("lsq step: R + Lambda is numerically singular");
  }
  LsqIterate it;
  it.gain_next = inner.partialPivLu().solve(u.kcal);
  it.value = std::move(u.value);
  it.kcal = std::move(u.kcal);
  it.lambda = std::move(u.lambda);
  it.residual = sol.residual;
  return it;
}

void require_stage_data(const DataMoments& d) {
  if (d.n < 1 || d.m < 1) throw DimensionError("data moments: empty dimensions");
}

template <class Step>
StageReport run_stage(const char* name, const Mat& start, double epsilon, int max_iter,
                      Step step) {
  StageReport rep;
  Mat current = start;
  for (int k = 0; k < max_iter; ++k) {
    LsqIterate it = step(current);
    const double change = (it.gain_next - current).norm();
    rep.gains.push_back(current);
    rep.gain_changes.push_back(change);
    const Mat next = it.gain_next;
    rep.iterates.push_back(std::move(it));
    if (!std::isfinite(change) || change > kDivergenceBound) {
      throw IterationError(std::string(name) + ": gain iteration diverged at step " +
                           std::to_string(k) + " (initial gain may not be stabilizing)");
    }
    if (change <= epsilon) {
      rep.converged = true;
      return rep;
    }
    current = next;
  }
  throw MaxIterExceededError(
      std::string(name) + ": no convergence within " + std::to_string(max_iter) + " iterations",
      max_iter);
}

}  // namespace

int required_rank(int n, int m) { return packed_size(n) + n * m + packed_size(m); }

DataMoments build_moments_matrices(const MomentTrajectories& moments) {
  moments.validate();
  const int l = moments.l();
  if (l < 2) {
    throw RankDeficientError("build_moments_matrices: need l >= 2 samples, got " +
                                 std::to_string(l),
                             0, required_rank(moments.n(), moments.m()));
  }
  const int rows = l - 1;
  DataMoments d;
  d.n = moments.n();
  d.m = moments.m();
  d.Ixx = kron_rows(moments.dx, moments.dx, 0, rows);
  d.Ixx_next = kron_rows(moments.dx, moments.dx, 1, rows);
  d.Ixu = kron_rows(moments.dx, moments.du, 0, rows);
  d.Iuu = kron_rows(moments.du, moments.du, 0, rows);
  d.Bxx = kron_rows(moments.xbar, moments.xbar, 0, rows);
  d.Bxx_next = kron_rows(moments.xbar, moments.xbar, 1, rows);
  d.Bxu = kron_rows(moments.xbar, moments.ubar, 0, rows);
  d.Buu = kron_rows(moments.ubar, moments.ubar, 0, rows);
  return d;
}

RankVerdict rank_check(const DataMoments& data, Stage stage) {
  require_stage_data(data);
  const Mat stacked = stage == Stage::kIndividual
                          ? stacked_data(data.Ixx, data.Ixu, data.Iuu, data.n, data.m)
                          : stacked_data(data.Bxx, data.Bxu, data.Buu, data.n, data.m);
  RankVerdict v;
  v.required = required_rank(data.n, data.m);
  v.rank = numerical_rank(stacked, kRankTol);
  v.sigma_min_ratio = sigma_ratio(stacked);
  v.ok = v.rank == v.required && data.rows() >= v.required;
  return v;
}

Mat regression_matrix(const Mat& xx, const Mat& xx_next, const Mat& xu, const Mat& uu,
                      const Mat& gain) {
  const auto m = gain.rows();
  const auto n = gain.cols();
  if (xx.cols() != n * n || xx_next.cols() != n * n || xu.cols() != n * m ||
      uu.cols() != m * m) {
    throw DimensionError("regression_matrix: data widths do not match the gain shape");
  }
  const Mat kt = gain.transpose();
  const Mat id = Mat::Identity(n, n);
  Mat a(xx.rows(), packed_size(static_cast<int>(n)) + n * m + packed_size(static_cast<int>(m)));
  a << (xx - xx_next) * duplication_matrix(static_cast<int>(n)),
      2.0 * xu + 2.0 * xx * kron(id, kt),
      (uu - xx * kron(kt, kt)) * duplication_matrix(static_cast<int>(m));
  return a;
}

LsqIterate lsq_step_p(const DataMoments& data, const Mat& gain, const SymMat& q, const SymMat& r) {
  require_stage_data(data);
  const SymMat q_stage = SymMat::from_full(gain.transpose() * r.full() * gain + q.full(), true);
  return solve_step(data.Ixx, data.Ixx_next, data.Ixu, data.Iuu, data.n, data.m, gain, q_stage, r);
}

LsqIterate lsq_step_pi(const DataMoments& data, const Mat& khat, const Mat& kbar, const SymMat& q,
                       const SymMat& r, const SymMat& qgamma) {
  require_stage_data(data);
  if (khat.rows() != kbar.rows() || khat.cols() != kbar.cols()) {
    throw DimensionError("lsq_step_pi: Khat and Kbar shapes differ");
  }
  const Mat total = khat + kbar;
  const SymMat q_stage = SymMat::from_full(
      total.transpose() * r.full() * total + q.full() + qgamma.full(), true);
  LsqIterate it = solve_step(data.Bxx, data.Bxx_next, data.Bxu, data.Buu, data.n, data.m, total,
                             q_stage, r);
  it.gain_next -= khat;
  return it;
}

Algorithm1Result run_algorithm1(const MomentTrajectories& dataset, const Mat& K0, const Mat& kbar0,
                                const CostSpec& cost, double epsilon, int max_iter) {
  if (!(epsilon > 0.0)) throw Error("run_algorithm1: epsilon must be positive");
  if (max_iter < 1) throw Error("run_algorithm1: max_iter must be >= 1");
  const DataMoments data = build_moments_matrices(dataset);
  if (cost.n() != data.n || cost.m() != data.m) {
    throw DimensionError("run_algorithm1: cost dimensions differ from dataset");
  }

  Algorithm1Result res;
  res.rank1 = rank_check(data, Stage::kIndividual);
  res.rank2 = rank_check(data, Stage::kMeanField);
  if (!res.rank1.ok || !res.rank2.ok) {
    throw RankConditionError("run_algorithm1: rank conditions not satisfied (stage 1 rank " +
                                 std::to_string(res.rank1.rank) + ", stage 2 rank " +
                                 std::to_string(res.rank2.rank) + ", required " +
                                 std::to_string(res.rank1.required) + ")",
                             res.rank1, res.rank2);
  }

  res.stage1 = run_stage("stage 1", K0, epsilon, max_iter, [&](const Mat& k) {
    return lsq_step_p(data, k, cost.Q(), cost.R());
  });
  const LsqIterate& s1 = res.stage1.iterates.back();
  res.Phat = s1.value;
  res.Khat = s1.gain_next;
  res.Lambda1 = s1.lambda;

  res.stage2 = run_stage("stage 2", kbar0, epsilon, max_iter, [&](const Mat& kb) {
    return lsq_step_pi(data, res.Khat, kb, cost.Q(), cost.R(), cost.QGamma());
  });
  const LsqIterate& s2 = res.stage2.iterates.back();
  res.Pihat = s2.value;
  res.Kbarhat = s2.gain_next;
  res.Lambda2 = s2.lambda;
  return res;
}

}  // namespace mfsc
