#include "mfsc/matalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "mfsc/errors.hpp"

namespace mfsc {

namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kSchurMargin = 1e-12;

void require_square(const Mat& m, const char* who) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DimensionError(std::string(who) + ": expected a non-empty square matrix, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

void require_finite(const Mat& m, const char* who) {
  if (!all_finite(m)) throw NonFiniteError(std::string(who) + ": non-finite entry");
}

Eigen::JacobiSVD<Mat> svd_of(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  return svd;
}

// Index of (i, j), i <= j, in the row-major packed upper triangle.
int packed_index(int n, int i, int j) { return i * n - i * (i - 1) / 2 + (j - i); }

}  // namespace

SymMat::SymMat(int n) : full_(Mat::Zero(n, n)) {}

SymMat SymMat::from_full(const Mat& m, bool symmetrize) {
  require_square(m, "SymMat");
  require_finite(m, "SymMat");
  if (!symmetrize) {
    const double skew = inf_norm(m - m.transpose());
    if (skew > kSymmetryTol * inf_norm(m)) {
      throw DimensionError("SymMat: matrix is not symmetric (skew " + std::to_string(skew) + ")");
    }
  }
  SymMat s;
  s.full_ = 0.5 * (m + m.transpose());
  return s;
}

SymMat SymMat::from_packed(const Vec& packed) {
  const auto len = packed.size();
  int n = 0;
  while (packed_size(n) < len) ++n;
  if (packed_size(n) != len || n == 0) {
    throw DimensionError("SymMat: packed length " + std::to_string(len) +
                         " is not n(n+1)/2 for any n >= 1");
  }
  require_finite(packed, "SymMat");
  SymMat s(n);
  int idx = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      s.full_(i, j) = packed(idx);
      s.full_(j, i) = packed(idx);
      ++idx;
    }
  }
  return s;
}

Vec SymMat::packed() const {
  const int n = dim();
  Vec out(packed_size(n));
  int idx = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) out(idx++) = full_(i, j);
  return out;
}

Vec svec(const Mat& m, bool symmetrize) { return SymMat::from_full(m, symmetrize).packed(); }

SymMat smat(const Vec& packed) { return SymMat::from_packed(packed); }

Vec vec(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

Mat unvec(const Vec& v, int rows, int cols) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols) {
    throw DimensionError("unvec: length does not match shape");
  }
  return Eigen::Map<const Mat>(v.data(), rows, cols);
}

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Mat duplication_matrix(int n) {
  Mat d = Mat::Zero(n * n, packed_size(n));
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const int c = packed_index(n, i, j);
      d(i + j * n, c) = 1.0;
      d(j + i * n, c) = 1.0;
    }
  }
  return d;
}

double inf_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

bool all_finite(const Mat& m) { return m.allFinite(); }

double spectral_radius(const Mat& m) {
  require_square(m, "spectral_radius");
  require_finite(m, "spectral_radius");
  Eigen::EigenSolver<Mat> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw NonConvergenceError("spectral_radius: eigenvalue iteration did not converge");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

SymMat solve_stein(const Mat& a, const SymMat& s) {
  require_square(a, "solve_stein");
  require_finite(a, "solve_stein");
  const int n = static_cast<int>(a.rows());
  if (s.dim() != n) throw DimensionError("solve_stein: A and S dimensions differ");
  const double rho = spectral_radius(a);
  if (rho >= 1.0 - kSchurMargin) {
    throw NotStabilizingError("solve_stein: A is not Schur (spectral radius " +
                                  std::to_string(rho) + ")",
                              rho);
  }

  // Row (i,j) of the reduced system: P_ij - sum_{a,b} A_ai A_bj P_ab = S_ij,
  // with P_ab = P_ba folded onto the packed unknown for a <= b.
  const int np = packed_size(n);
  Mat sys = Mat::Identity(np, np);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const int row = packed_index(n, i, j);
      for (int p = 0; p < n; ++p) {
        for (int q = p; q < n; ++q) {
          double c = a(p, i) * a(q, j);
          if (p != q) c += a(q, i) * a(p, j);
          sys(row, packed_index(n, p, q)) -= c;
        }
      }
    }
  }
  const Vec rhs = s.packed();
  Eigen::FullPivLU<Mat> lu(sys);
  if (!lu.isInvertible()) {
    throw Error("solve_stein: reduced Stein system is singular despite a Schur A");
  }
  Vec x = lu.solve(rhs);
  // One pass of iterative refinement tightens the residual when A is near the unit circle.
  x += lu.solve(rhs - sys * x);
  SymMat p = SymMat::from_packed(x);

  const Mat resid = p.full() - a.transpose() * p.full() * a - s.full();
  const double tol = 1e-10 * std::max(1.0, inf_norm(p.full()));
  if (inf_norm(resid) > tol) {
    throw Error("solve_stein: residual " + std::to_string(inf_norm(resid)) +
                " exceeds tolerance " + std::to_string(tol));
  }
  return p;
}

double min_eig_sym(const SymMat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m.full(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NonConvergenceError("min_eig_sym: did not converge");
  return es.eigenvalues().minCoeff();
}

double max_eig_sym(const SymMat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m.full(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NonConvergenceError("max_eig_sym: did not converge");
  return es.eigenvalues().maxCoeff();
}

Inertia inertia(const SymMat& m, double tol) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m.full(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NonConvergenceError("inertia: did not converge");
  const Vec& ev = es.eigenvalues();
  const double cut = tol * std::max(1.0, ev.cwiseAbs().maxCoeff());
  Inertia out;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > cut) {
      ++out.positive;
    } else if (ev(i) < -cut) {
      ++out.negative;
    } else {
      ++out.zero;
    }
  }
  return out;
}

double sigma_ratio(const Mat& m) {
  if (m.size() == 0) return 0.0;
  const Vec sv = svd_of(m).singularValues();
  if (sv(0) == 0.0) return 0.0;
  return sv(sv.size() - 1) / sv(0);
}

bool is_invertible(const Mat& m, double tol, double scale) {
  require_square(m, "is_invertible");
  require_finite(m, "is_invertible");
  if (m.size() == 0) return true;
  const Vec sv = svd_of(m).singularValues();
  return sv(sv.size() - 1) > tol * std::max(sv(0), scale);
}

double abs_det(const Mat& m) {
  require_square(m, "abs_det");
  return std::abs(m.determinant());
}

int numerical_rank(const Mat& m, double rel_tol) {
  if (m.size() == 0) return 0;
  const Vec sv = svd_of(m).singularValues();
  if (sv(0) == 0.0) return 0;
  return static_cast<int>((sv.array() > rel_tol * sv(0)).count());
}

LsqResult lsq_solve(const Mat& a, const Vec& b, double rank_tol) {
  if (a.rows() != b.size()) throw DimensionError("lsq_solve: row count differs from rhs length");
  require_finite(a, "lsq_solve");
  require_finite(b, "lsq_solve");
  const int cols = static_cast<int>(a.cols());
  const int rank = numerical_rank(a, rank_tol);
  if (rank < cols) {
    throw RankDeficientError("lsq_solve: matrix has numerical rank " + std::to_string(rank) +
                                 " < " + std::to_string(cols) + " columns",
                             rank, cols);
  }
  Eigen::ColPivHouseholderQR<Mat> qr(a);
  LsqResult out;
  out.x = qr.solve(b);
  out.residual = (a * out.x - b).norm();
  out.rank = rank;
  return out;
}

}  // namespace mfsc
