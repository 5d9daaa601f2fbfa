#pragma once

// Fixtures shared by the test binaries: the benchmark system, seeded random
// instances, and oracles that avoid the library's own code paths.

#include <cmath>
#include <cstdint>
#include <random>

#include "mfsc/harness.hpp"

namespace mfsc::testing {

inline SystemModel paper_model() {
  SystemModel s;
  s.A = Mat{{0.08, 0.63}, {0.39, 0.26}};
  s.G = Mat{{0.10, 0.05}, {0.07, 0.06}};
  s.B = Mat{{0.10}, {0.16}};
  s.D = Mat{{0.12, 0.05}, {0.11, 0.12}};
  s.sigma2 = 0.01;
  return s;
}

inline CostSpec paper_cost(double q22 = -0.12) {
  return CostSpec(SymMat::from_full(Mat{{2.0, -1.54}, {-1.54, q22}}),
                  SymMat::from_full(Mat{{-1.74}}), Mat{{0.62, 0.84}, {0.80, 0.54}});
}

inline Mat paper_K0() { return Mat{{0.05, -0.91}}; }
inline Mat paper_Kbar0() { return Mat{{2.87, 0.83}}; }

inline ProblemConfig paper_config() {
  ProblemConfig c;
  c.model = paper_model();
  c.cost = paper_cost();
  c.N = 200;
  c.x0_low = Vec{{0.0, 0.0}};
  c.x0_high = Vec{{12.0, -6.0}};
  c.K0 = paper_K0();
  c.Kbar0 = paper_Kbar0();
  c.epsilon = 1e-4;
  c.seed = 20240501;
  c.l = 50;
  c.M = 100;
  return c;
}

inline Mat random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

inline SymMat random_sym(std::mt19937_64& rng, int n) {
  const Mat m = random_matrix(rng, n, n);
  return SymMat::from_full(m + m.transpose(), true);
}

inline SymMat random_pd(std::mt19937_64& rng, int n, double shift = 0.1) {
  const Mat c = random_matrix(rng, n, n);
  return SymMat::from_full(c.transpose() * c + shift * Mat::Identity(n, n), true);
}

/// Random matrix rescaled to the given spectral radius.
inline Mat random_with_radius(std::mt19937_64& rng, int n, double radius) {
  Mat m = random_matrix(rng, n, n);
  const double r = spectral_radius(m);
  return r > 0.0 ? Mat(m * (radius / r)) : m;
}

/// A PSD-regime instance: Q > 0, R > 0, generic (A, B) and (A + G, B).
struct Instance {
  SystemModel model;
  CostSpec cost;
  Mat K0;
  Mat Kbar0;
};

inline Instance random_instance(std::mt19937_64& rng, int n, int m, bool coupled = true) {
  std::uniform_real_distribution<double> radius(0.4, 1.3);
  Instance in;
  in.model.A = random_with_radius(rng, n, radius(rng));
  in.model.B = random_matrix(rng, n, m, 0.7);
  in.model.G = coupled ? random_matrix(rng, n, n, 0.15) : Mat::Zero(n, n);
  in.model.D = 0.2 * Mat::Identity(n, n);
  in.model.sigma2 = 0.01;
  const Mat gamma = coupled ? random_matrix(rng, n, n, 0.3) : Mat::Zero(n, n);
  in.cost = CostSpec(random_pd(rng, n), random_pd(rng, m, 0.5), gamma);
  in.K0 = find_stabilizer(in.model.A, in.model.B);
  in.Kbar0 = find_stabilizer(in.model.A + in.model.G, in.model.B) - in.K0;
  return in;
}

/// Noiseless, exactly propagated moments under the instance's K0 with
/// persistent sinusoidal exploration.
inline MomentTrajectories exact_moments(const SystemModel& model, const Mat& K0,
                                        std::uint64_t seed, int l = 60, int agents = 8) {
  std::mt19937_64 rng(seed);
  const ExplorationSpec e =
      ExplorationSpec::draw(agents, model.m(), 100, -100.0, 100.0, seed);
  const Vec dx0 = random_matrix(rng, model.n(), 1);
  const Vec xbar0 = random_matrix(rng, model.n(), 1);
  return propagate_expected_moments(model, K0, e, dx0, xbar0, l);
}

/// Stein oracle: dense solve of (I - A'(x)A') vec(P) = vec(S) over all n^2
/// entries, with its own Kronecker assembly.
inline Mat stein_kronecker_oracle(const Mat& a, const Mat& s) {
  const int n = static_cast<int>(a.rows());
  const int nn = n * n;
  Mat sys = Mat::Identity(nn, nn);
  // vec(A' P A) = (A' (x) A') vec(P) with column-major vec: entry (i + n j, k + n l) = A(k,i) A(l,j).
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) sys(i + n * j, k + n * l) -= a(k, i) * a(l, j);
  Vec rhs(nn);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) rhs(i + n * j) = s(i, j);
  const Vec x = sys.fullPivLu().solve(rhs);
  Mat p(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) p(i, j) = x(i + n * j);
  return p;
}

/// Elementwise |a - b| <= tol * max(1, |b|_max).
inline bool close(const Mat& a, const Mat& b, double tol) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() <= tol * scale;
}

inline double max_abs_diff(const Mat& a, const Mat& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace mfsc::testing
