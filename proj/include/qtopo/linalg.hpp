// Dense complex linear-algebra kernel shared by every other module.
//
// Vectorization is column stacking throughout: vec(M) lists column 0 top to
// bottom, then column 1, and so on. Every Kronecker identity in the library
// assumes this, in particular vec(A X B) = (B^T (x) A) vec(X).

#pragma once

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace qtopo {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

/// Relative asymmetry above which a matrix is rejected as non-Hermitian.
inline constexpr double kHermitianRejectTol = 1e-10;

/// Square complex matrix with M = M^dagger.
///
/// Construction symmetrizes the input as (M + M^dagger)/2 after checking that
/// its asymmetry is below kHermitianRejectTol relative to its magnitude, so
/// round-off from file I/O or arithmetic never breaks the invariant.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;
  explicit HermitianMatrix(const ComplexMatrix& m);

  static HermitianMatrix zero(std::size_t dim);
  static HermitianMatrix identity(std::size_t dim);
  /// Real symmetric input, e.g. an adjacency matrix.
  static HermitianMatrix from_real(const RealMatrix& m);

  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  const ComplexMatrix& matrix() const { return m_; }
  Complex operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }

 private:
  ComplexMatrix m_;
};

/// Hermitian matrix with an exactly zero diagonal (the admissible set).
///
/// Storage is the full matrix, but construction only reads the strict upper
/// triangle; the lower triangle is its conjugate and the diagonal is 0.0.
class AdmissibleMatrix {
 public:
  AdmissibleMatrix() = default;
  /// Throws if `m` is not Hermitian or has a diagonal entry above `diag_tol`
  /// relative to its largest entry.
  explicit AdmissibleMatrix(const ComplexMatrix& m, double diag_tol = 1e-10);

  static AdmissibleMatrix zero(std::size_t dim);
  static AdmissibleMatrix from_upper(const ComplexMatrix& m);

  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  const ComplexMatrix& matrix() const { return m_; }
  HermitianMatrix hermitian() const { return HermitianMatrix(m_); }

 private:
  ComplexMatrix m_;
};

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

/// Column-stacking vectorization.
ComplexVector vec(const ComplexMatrix& m);

/// Inverse of vec. Throws std::invalid_argument on a length mismatch.
ComplexMatrix unvec(const ComplexVector& v, Eigen::Index rows, Eigen::Index cols);

/// a*b - b*a
ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b);

struct HermitianEigen {
  RealVector values;     // ascending
  ComplexMatrix vectors; // unitary, columns are eigenvectors
};

HermitianEigen eig_hermitian(const HermitianMatrix& h);

/// Relative rank tolerance used when nothing else is configured.
inline constexpr double kDefaultRankRtol = 1e-9;
/// sigma_max below this counts as the zero matrix.
inline constexpr double kRankAbsFloor = 1e-12;

struct SvdResult {
  RealVector singular_values;  // descending
  ComplexMatrix u;             // thin left basis
  ComplexMatrix v;             // thin right basis
  std::size_t rank = 0;
  double tolerance = 0.0;      // absolute threshold actually applied

  /// Smallest retained singular value, 0 if rank is 0.
  double sigma_min_retained() const;
  /// Largest discarded singular value, 0 if nothing was discarded.
  double sigma_max_discarded() const;
};

struct SvdPinv {
  SvdResult svd;
  ComplexMatrix pinv;
};

/// Numerical rank is #{sigma_i > rtol * sigma_max}; rank 0 when sigma_max is
/// below kRankAbsFloor. The pseudoinverse inverts retained values only.
SvdPinv svd_rank_pinv(const ComplexMatrix& a, double rtol = kDefaultRankRtol);

/// Same rank rule for real matrices, without forming the pseudoinverse.
struct RealSvd {
  RealVector singular_values;
  RealMatrix u;
  RealMatrix v;
  std::size_t rank = 0;
  double tolerance = 0.0;

  double sigma_min_retained() const;
  double sigma_max_discarded() const;
  /// Truncated least-squares solution x = A^+ b.
  RealVector solve(const RealVector& b) const;
};

RealSvd real_svd(const RealMatrix& a, double rtol = kDefaultRankRtol);

/// Largest singular value.
double spectral_norm(const ComplexMatrix& a);

/// max |a_ij| over all entries, 0 for an empty matrix.
double max_abs(const ComplexMatrix& a);

bool all_finite(const ComplexMatrix& a);

}  // namespace qtopo
