#pragma once

// Dense matrix kernels: symmetric packing, Stein solves, spectra, least squares.

#include <Eigen/Dense>

namespace mfsc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Number of entries in the packed upper triangle of an n x n matrix.
constexpr int packed_size(int n) { return n * (n + 1) / 2; }

/// Symmetric matrix. Any instance expands to an exactly symmetric dense form.
class SymMat {
 public:
  SymMat() = default;

  /// Zero matrix of dimension n.
  explicit SymMat(int n);

  /// Wraps a square matrix. Throws DimensionError if it is not square and
  /// NonFiniteError on NaN/Inf. When `symmetrize` is false the input must be
  /// symmetric to 1e-10 * ||M||_inf; the stored matrix is (M + M')/2 either way.
  static SymMat from_full(const Mat& m, bool symmetrize = false);

  /// Builds from the upper triangle packed row by row.
  static SymMat from_packed(const Vec& packed);

  int dim() const { return static_cast<int>(full_.rows()); }
  const Mat& full() const { return full_; }
  Vec packed() const;

  bool operator==(const SymMat& other) const { return full_ == other.full_; }

 private:
  Mat full_;
};

/// Half-vectorization (upper triangle, row-major).
Vec svec(const Mat& m, bool symmetrize = false);
SymMat smat(const Vec& packed);

/// Column-stacking vectorization.
Vec vec(const Mat& m);
Mat unvec(const Vec& v, int rows, int cols);

Mat kron(const Mat& a, const Mat& b);

/// Duplication matrix D_n with vec(S) = D_n * svec(S) for symmetric S.
Mat duplication_matrix(int n);

double inf_norm(const Mat& m);
bool all_finite(const Mat& m);

/// Largest eigenvalue modulus.
double spectral_radius(const Mat& m);

/// Solves P = A' P A + S. Requires spectral_radius(A) < 1.
SymMat solve_stein(const Mat& a, const SymMat& s);

double min_eig_sym(const SymMat& m);
double max_eig_sym(const SymMat& m);

/// Signature counts of a symmetric matrix (eigenvalues within tol*scale are zero).
struct Inertia {
  int positive = 0;
  int negative = 0;
  int zero = 0;
};
Inertia inertia(const SymMat& m, double tol = 1e-12);

/// Smallest/largest singular value ratio; 0 for a zero matrix.
double sigma_ratio(const Mat& m);

/// True when sigma_min > tol * max(sigma_max, scale). A sum such as R + B'PB
/// should pass the size of its terms as `scale`, so that cancellation is caught
/// even for 1x1 matrices.
bool is_invertible(const Mat& m, double tol = 1e-12, double scale = 0.0);

/// |det(M)|, reported alongside invertibility verdicts.
double abs_det(const Mat& m);

/// Numerical rank with threshold sigma_i > rel_tol * sigma_max.
int numerical_rank(const Mat& m, double rel_tol);

struct LsqResult {
  Vec x;
  double residual = 0.0;  // ||Ax - b||_2
  int rank = 0;
};

/// Full-column-rank least squares via column-pivoted QR. Throws
/// RankDeficientError carrying the numerical rank if rank < cols.
LsqResult lsq_solve(const Mat& a, const Vec& b, double rank_tol = 1e-10);

}  // namespace mfsc
