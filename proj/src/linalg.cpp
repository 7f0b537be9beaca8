#include "qtopo/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace qtopo {

namespace {

// Below this column count Jacobi is both faster and more accurate.
constexpr Eigen::Index kJacobiMaxCols = 32;

// Thin SVD through LAPACK's QR-iteration driver (?gesvd). Eigen 3.4's BDCSVD
// trips an internal index assertion on matrices with clusters of exactly-zero
// singular values, which structurally degenerate commutator systems produce;
// the divide-and-conquer driver (?gesdd) of some distribution builds returns
// non-orthogonal U, so it is not used.
void lapack_svd(const RealMatrix& a, RealVector& sv, RealMatrix& u, RealMatrix& v) {
  const auto m = static_cast<lapack_int>(a.rows());
  const auto n = static_cast<lapack_int>(a.cols());
  const lapack_int k = std::min(m, n);
  sv.resize(k);
  u.resize(m, k);
  RealMatrix vt(k, n);
  if (k == 0) {
    v = RealMatrix::Zero(n, 0);
    return;
  }
  RealMatrix w = a;
  RealVector superb(std::max<lapack_int>(k - 1, 1));
  const lapack_int info = LAPACKE_dgesvd(LAPACK_COL_MAJOR, 'S', 'S', m, n, w.data(), m, sv.data(),
                                         u.data(), m, vt.data(), k, superb.data());
  if (info != 0) throw std::runtime_error("SVD failed (LAPACK info " + std::to_string(info) + ")");
  v = vt.transpose();
}

void lapack_svd(const ComplexMatrix& a, RealVector& sv, ComplexMatrix& u, ComplexMatrix& v) {
  const auto m = static_cast<lapack_int>(a.rows());
  const auto n = static_cast<lapack_int>(a.cols());
  const lapack_int k = std::min(m, n);
  sv.resize(k);
  u.resize(m, k);
  ComplexMatrix vt(k, n);
  if (k == 0) {
    v = ComplexMatrix::Zero(n, 0);
    return;
  }
  ComplexMatrix w = a;
  auto* wp = reinterpret_cast<lapack_complex_double*>(w.data());
  auto* up = reinterpret_cast<lapack_complex_double*>(u.data());
  auto* vp = reinterpret_cast<lapack_complex_double*>(vt.data());
  RealVector superb(std::max<lapack_int>(k - 1, 1));
  const lapack_int info = LAPACKE_zgesvd(LAPACK_COL_MAJOR, 'S', 'S', m, n, wp, m, sv.data(), up, m,
                                         vp, k, superb.data());
  if (info != 0) throw std::runtime_error("SVD failed (LAPACK info " + std::to_string(info) + ")");
  v = vt.adjoint();
}

template <typename Matrix, typename Values>
std::size_t count_rank(const Values& sv, double rtol, double& tol_out) {
  if (sv.size() == 0 || sv(0) < kRankAbsFloor) {
    tol_out = kRankAbsFloor;
    return 0;
  }
  tol_out = rtol * sv(0);
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol_out) ++r;
  }
  return r;
}

template <typename Svd>
double min_retained(const Svd& s) {
  return s.rank == 0 ? 0.0 : s.singular_values(static_cast<Eigen::Index>(s.rank) - 1);
}

template <typename Svd>
double max_discarded(const Svd& s) {
  return static_cast<Eigen::Index>(s.rank) < s.singular_values.size()
             ? s.singular_values(static_cast<Eigen::Index>(s.rank))
             : 0.0;
}

}  // namespace

HermitianMatrix::HermitianMatrix(const ComplexMatrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw std::invalid_argument("HermitianMatrix: matrix must be square and non-empty, got " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  if (!all_finite(m)) throw std::invalid_argument("HermitianMatrix: non-finite entry");
  const ComplexMatrix adj = m.adjoint();
  const double scale = max_abs(m);
  const double asym = max_abs(m - adj);
  if (asym > kHermitianRejectTol * std::max(scale, 1e-300) && asym > 0.0) {
    throw std::invalid_argument("HermitianMatrix: input is not Hermitian (relative asymmetry " +
                                std::to_string(asym / scale) + ")");
  }
  m_ = 0.5 * (m + adj);
}

HermitianMatrix HermitianMatrix::zero(std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  return HermitianMatrix(ComplexMatrix::Zero(n, n));
}

HermitianMatrix HermitianMatrix::identity(std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  return HermitianMatrix(ComplexMatrix::Identity(n, n));
}

HermitianMatrix HermitianMatrix::from_real(const RealMatrix& m) {
  return HermitianMatrix(ComplexMatrix(m.cast<Complex>()));
}

AdmissibleMatrix::AdmissibleMatrix(const ComplexMatrix& m, double diag_tol) {
  const HermitianMatrix h(m);
  const double scale = max_abs(h.matrix());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (std::abs(h(i, i)) > diag_tol * std::max(scale, 1e-300) && std::abs(h(i, i)) > 0.0) {
      throw std::invalid_argument("AdmissibleMatrix: diagonal entry " + std::to_string(i + 1) +
                                  " is not zero");
    }
  }
  *this = from_upper(h.matrix());
}

AdmissibleMatrix AdmissibleMatrix::zero(std::size_t dim) {
  AdmissibleMatrix a;
  const auto n = static_cast<Eigen::Index>(dim);
  a.m_ = ComplexMatrix::Zero(n, n);
  return a;
}

AdmissibleMatrix AdmissibleMatrix::from_upper(const ComplexMatrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw std::invalid_argument("AdmissibleMatrix: matrix must be square and non-empty");
  }
  if (!all_finite(m)) throw std::invalid_argument("AdmissibleMatrix: non-finite entry");
  AdmissibleMatrix a = zero(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i) {
      a.m_(i, j) = m(i, j);
      a.m_(j, i) = std::conj(m(i, j));
    }
  }
  return a;
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

ComplexVector vec(const ComplexMatrix& m) {
  // Eigen's default storage is column-major, so this is a straight copy.
  return Eigen::Map<const ComplexVector>(m.data(), m.size());
}

ComplexMatrix unvec(const ComplexVector& v, Eigen::Index rows, Eigen::Index cols) {
  if (rows < 1 || cols < 1 || v.size() != rows * cols) {
    throw std::invalid_argument("unvec: vector of length " + std::to_string(v.size()) +
                                " cannot be reshaped to " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
  return Eigen::Map<const ComplexMatrix>(v.data(), rows, cols);
}

ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
  return a * b - b * a;
}

HermitianEigen eig_hermitian(const HermitianMatrix& h) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h.matrix());
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("eig_hermitian: eigensolver did not converge");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

double SvdResult::sigma_min_retained() const { return min_retained(*this); }
double SvdResult::sigma_max_discarded() const { return max_discarded(*this); }
double RealSvd::sigma_min_retained() const { return min_retained(*this); }
double RealSvd::sigma_max_discarded() const { return max_discarded(*this); }

RealVector RealSvd::solve(const RealVector& b) const {
  const auto r = static_cast<Eigen::Index>(rank);
  RealVector coeffs = u.leftCols(r).transpose() * b;
  coeffs.array() /= singular_values.head(r).array();
  return v.leftCols(r) * coeffs;
}

SvdPinv svd_rank_pinv(const ComplexMatrix& a, double rtol) {
  if (!(rtol > 0.0)) throw std::invalid_argument("svd_rank_pinv: rtol must be positive");
  SvdPinv out;
  auto& s = out.svd;
  if (a.cols() <= kJacobiMaxCols) {
    Eigen::JacobiSVD<ComplexMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    s.singular_values = svd.singularValues();
    s.u = svd.matrixU();
    s.v = svd.matrixV();
  } else {
    lapack_svd(a, s.singular_values, s.u, s.v);
  }
  s.rank = count_rank<ComplexMatrix>(s.singular_values, rtol, s.tolerance);
  const auto r = static_cast<Eigen::Index>(s.rank);
  RealVector inv = s.singular_values.head(r).cwiseInverse();
  out.pinv = s.v.leftCols(r) * inv.cast<Complex>().asDiagonal() * s.u.leftCols(r).adjoint();
  if (r == 0) out.pinv = ComplexMatrix::Zero(a.cols(), a.rows());
  return out;
}

RealSvd real_svd(const RealMatrix& a, double rtol) {
  if (!(rtol > 0.0)) throw std::invalid_argument("real_svd: rtol must be positive");
  RealSvd s;
  if (a.cols() <= kJacobiMaxCols) {
    Eigen::JacobiSVD<RealMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    s.singular_values = svd.singularValues();
    s.u = svd.matrixU();
    s.v = svd.matrixV();
  } else {
    lapack_svd(a, s.singular_values, s.u, s.v);
  }
  s.rank = count_rank<RealMatrix>(s.singular_values, rtol, s.tolerance);
  return s;
}

double spectral_norm(const ComplexMatrix& a) {
  if (a.size() == 0) return 0.0;
  if (a.cols() <= kJacobiMaxCols) {
    Eigen::JacobiSVD<ComplexMatrix> svd(a);
    return svd.singularValues()(0);
  }
  RealVector sv;
  ComplexMatrix u, v;
  lapack_svd(a, sv, u, v);
  return sv(0);
}

double max_abs(const ComplexMatrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

bool all_finite(const ComplexMatrix& a) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Complex z = a.data()[i];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

}  // namespace qtopo
