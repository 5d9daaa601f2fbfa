#include "mfsc/pi_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "mfsc/errors.hpp"

namespace mfsc {

namespace {

constexpr double kSchurMargin = 1e-8;
constexpr double kInvertTol = 1e-12;

SymMat inner_matrix(const Mat& b, const SymMat& r, const SymMat& p) {
  return SymMat::from_full(r.full() + b.transpose() * p.full() * b, true);
}

double min_abs_eig(const SymMat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m.full(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().minCoeff();
}

// Policy evaluation on x+ = (a - b*gain) x with stage weight gain' R gain + q,
// followed by the greedy improvement (R + B'PB)^{-1} B'P a.
PiStep evaluate_improve(const Mat& a, const Mat& b, const SymMat& q, const SymMat& r,
                        const Mat& gain) {
  const Mat closed = a - b * gain;
  const double rho = spectral_radius(closed);
  if (!(rho < 1.0 - kSchurMargin)) {
    throw NotStabilizingError(
        "policy evaluation: closed loop is not Schur (spectral radius " + std::to_string(rho) + ")",
        rho);
  }
  const SymMat stage = SymMat::from_full(gain.transpose() * r.full() * gain + q.full(), true);
  PiStep out;
  out.value = solve_stein(closed, stage);
  out.lambda = SymMat::from_full(b.transpose() * out.value.full() * b, true);
  out.next_gain = riccati_gain(a, b, r, out.value);
  out.spectral_radius = rho;
  return out;
}

SymMat augmented_q(const CostSpec& cost) {
  return SymMat::from_full(cost.Q().full() + cost.QGamma().full(), true);
}

// Shared loop for both stages. `step` maps the current iterate's gain to a PiStep.
template <class Step, class Policy>
SolveReport iterate(const char* stage, const Mat& a, const Mat& b, const SymMat& q,
                    const SymMat& r, const Mat& start, double epsilon, int max_iter, Step step,
                    Policy policy_of) {
  if (!(epsilon > 0.0)) throw Error(std::string(stage) + ": epsilon must be positive");
  if (max_iter < 1) throw Error(std::string(stage) + ": max_iter must be >= 1");
  SolveReport rep;
  Mat current = start;
  for (int k = 0; k < max_iter; ++k) {
    PiStep s = step(current);
    const double change = (s.next_gain - current).norm();
    const SymMat inner = inner_matrix(b, r, s.value);

    RiccatiIterate it;
    it.iter = k;
    it.gain = policy_of(current);
    it.next_gain = s.next_gain;
    it.value = s.value;
    it.lambda = s.lambda;
    rep.iterates.push_back(it);
    rep.gain_changes.push_back(change);
    rep.spectral_radii.push_back(s.spectral_radius);
    rep.residual_history.push_back(are_relative_residual(a, b, q, r, s.value));
    rep.inner_min_abs_eig.push_back(min_abs_eig(inner));
    rep.inner_inertia.push_back(inertia(inner));

    if (!std::isfinite(change)) throw IterationError(std::string(stage) + ": gain diverged");
    if (change <= epsilon) {
      rep.converged = true;
      return rep;
    }
    current = s.next_gain;
  }
  throw MaxIterExceededError(
      std::string(stage) + ": no convergence within " + std::to_string(max_iter) + " iterations",
      max_iter);
}

}  // namespace

Mat riccati_gain(const Mat& a, const Mat& b, const SymMat& r, const SymMat& p) {
  const SymMat inner = inner_matrix(b, r, p);
  const double scale = std::max(r.full().norm(), (inner.full() - r.full()).norm());
  if (!is_invertible(inner.full(), kInvertTol, scale)) {
    throw SingularInnerMatrixError("R + B'PB is numerically singular");
  }
  return inner.full().partialPivLu().solve(b.transpose() * p.full() * a);
}

SymMat riccati_map(const Mat& a, const Mat& b, const SymMat& q, const SymMat& r, const SymMat& p) {
  const Mat gain = riccati_gain(a, b, r, p);
  const Mat& pf = p.full();
  const Mat out = a.transpose() * pf * a - a.transpose() * pf * b * gain + q.full();
  return SymMat::from_full(out, true);
}

double are_relative_residual(const Mat& a, const Mat& b, const SymMat& q, const SymMat& r,
                             const SymMat& p) {
  const double scale = p.full().norm();
  const double diff = (p.full() - riccati_map(a, b, q, r, p).full()).norm();
  return scale > 0.0 ? diff / scale : diff;
}

PiStep pi_step_p(const SystemModel& model, const CostSpec& cost, const Mat& gain) {
  check_dimensions(model, cost);
  check_gain_shape(model, gain, "K_k");
  return evaluate_improve(model.A, model.B, cost.Q(), cost.R(), gain);
}

PiStep pi_step_pi(const SystemModel& model, const CostSpec& cost, const Mat& K, const Mat& kbar) {
  check_dimensions(model, cost);
  check_gain_shape(model, K, "K");
  check_gain_shape(model, kbar, "Kbar_k");
  PiStep s = evaluate_improve(model.A + model.G, model.B, augmented_q(cost), cost.R(), K + kbar);
  s.next_gain -= K;
  return s;
}

SolveReport solve_p(const SystemModel& model, const CostSpec& cost, const Mat& K0, double epsilon,
                    int max_iter) {
  check_dimensions(model, cost);
  check_gain_shape(model, K0, "K0");
  return iterate(
      "solve_p", model.A, model.B, cost.Q(), cost.R(), K0, epsilon, max_iter,
      [&](const Mat& k) { return pi_step_p(model, cost, k); }, [](const Mat& k) { return k; });
}

SolveReport solve_pi(const SystemModel& model, const CostSpec& cost, const Mat& K,
                     const Mat& kbar0, double epsilon, int max_iter) {
  check_dimensions(model, cost);
  check_gain_shape(model, K, "K");
  check_gain_shape(model, kbar0, "Kbar0");
  return iterate(
      "solve_pi", model.A + model.G, model.B, augmented_q(cost), cost.R(), kbar0, epsilon,
      max_iter, [&](const Mat& kb) { return pi_step_pi(model, cost, K, kb); },
      [&](const Mat& kb) { return Mat(K + kb); });
}

std::vector<Vec> mf_trajectory(const SystemModel& model, const GainPair& gains, const Vec& xbar0,
                               int horizon) {
  if (horizon < 0) throw Error("mf_trajectory: horizon must be >= 0");
  if (xbar0.size() != model.n()) throw DimensionError("mf_trajectory: xbar0 has wrong length");
  const Mat cl = closed_loop(model, gains).mean_field;
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(horizon) + 1);
  out.push_back(xbar0);
  for (int k = 0; k < horizon; ++k) out.push_back(cl * out.back());
  return out;
}

Mat find_stabilizer(const Mat& a, const Mat& b, int max_iter) {
  const auto n = static_cast<int>(a.rows());
  const auto m = static_cast<int>(b.cols());
  const SymMat q = SymMat::from_full(Mat::Identity(n, n));
  const SymMat r = SymMat::from_full(Mat::Identity(m, m));
  SymMat p(n);
  for (int j = 0; j < max_iter; ++j) {
    const SymMat next = riccati_map(a, b, q, r, p);
    const double delta = (next.full() - p.full()).norm();
    p = next;
    if (delta <= 1e-12 * std::max(1.0, p.full().norm())) break;
  }
  const Mat k = riccati_gain(a, b, r, p);
  const double rho = spectral_radius(a - b * k);
  if (!(rho < 1.0)) {
    throw NotStabilizingError("find_stabilizer: (A, B) appears not stabilizable", rho);
  }
  return k;
}

}  // namespace mfsc
