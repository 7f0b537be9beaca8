// Closed-system (Liouville-von Neumann) dynamics of density operators.

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "qtopo/linalg.hpp"

namespace qtopo {

/// Trace and PSD tolerances for density operators.
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kPsdTol = 1e-10;

/// Hermitian, positive semi-definite, unit-trace matrix.
class DensityOperator {
 public:
  DensityOperator() = default;
  /// Validates all three invariants; throws std::invalid_argument otherwise.
  explicit DensityOperator(const ComplexMatrix& rho);

  std::size_t dim() const { return rho_.dim(); }
  const ComplexMatrix& matrix() const { return rho_.matrix(); }
  const HermitianMatrix& hermitian() const { return rho_; }

 private:
  HermitianMatrix rho_;
};

/// Uniformly sampled trajectory t_k = k * dt, k = 0..n_steps, t_{n_steps} = tau.
class Trajectory {
 public:
  Trajectory(double tau, std::size_t n_steps, std::vector<DensityOperator> samples);

  double tau() const { return tau_; }
  double dt() const { return tau_ / static_cast<double>(n_steps_); }
  std::size_t n_steps() const { return n_steps_; }
  std::size_t dim() const { return samples_.front().dim(); }
  double time(std::size_t k) const;
  const std::vector<DensityOperator>& samples() const { return samples_; }
  const DensityOperator& front() const { return samples_.front(); }
  const DensityOperator& back() const { return samples_.back(); }

 private:
  double tau_;
  std::size_t n_steps_;
  std::vector<DensityOperator> samples_;
};

/// d^2 x d^2 generator L = -(i/hbar)(I (x) H - H^T (x) I) acting on vec(rho).
class Liouvillian {
 public:
  Liouvillian() = default;
  /// Wraps an arbitrary d^2 x d^2 matrix; `dim()` is d. Throws if the size is
  /// not a perfect square. Skew-Hermiticity is not enforced here so that
  /// reconstructed (noisy) generators can be represented.
  explicit Liouvillian(ComplexMatrix l, double hbar = 1.0);

  std::size_t dim() const { return dim_; }
  double hbar() const { return hbar_; }
  const ComplexMatrix& matrix() const { return l_; }
  /// ||L + L^dagger||_max relative to ||L||_max (0 for L = 0).
  double skew_deviation() const;

 private:
  ComplexMatrix l_;
  std::size_t dim_ = 0;
  double hbar_ = 1.0;
};

Liouvillian liouvillian(const HermitianMatrix& h, double hbar = 1.0);

/// Unitary propagator U = exp(-i H t / hbar), via one eigendecomposition.
class Propagator {
 public:
  explicit Propagator(const HermitianMatrix& h, double hbar = 1.0);

  ComplexMatrix unitary(double t) const;
  /// U X U^dagger for an arbitrary (not necessarily physical) operator X.
  ComplexMatrix evolve(const ComplexMatrix& x, double t) const;
  /// vec-picture propagator exp(L t), built from the same eigenstructure.
  ComplexMatrix superoperator(double t) const;

  const HermitianEigen& eigen() const { return eig_; }
  double hbar() const { return hbar_; }

 private:
  HermitianEigen eig_;
  double hbar_;
};

/// rho_t = U rho_0 U^dagger. Requires t >= 0.
DensityOperator propagate(const HermitianMatrix& h, const DensityOperator& rho0, double t,
                          double hbar = 1.0);

/// Throws std::invalid_argument unless tau/dt is an integer within 1e-9.
std::size_t steps_for(double tau, double dt);

/// n_s + 1 samples of rho_t on [0, tau]; one eigendecomposition is reused.
Trajectory sample_trajectory(const HermitianMatrix& h, const DensityOperator& rho0, double tau,
                             double dt, double hbar = 1.0);

/// Closed form of P = int_0^tau rho_t dt in the eigenbasis of H.
HermitianMatrix exact_gram(const HermitianMatrix& h, const DensityOperator& rho0, double tau,
                           double hbar = 1.0);

/// |omega| * tau below this uses the tau-linear limit in exact_gram.
inline constexpr double kDegenerateFrequencyTol = 1e-8;

/// Trajectory CSV: header "t,re_1_1,im_1_1,re_2_1,..." with column-major
/// (i, j) order; 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

}  // namespace qtopo
