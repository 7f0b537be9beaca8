// Full-information topology identification.
//
// From a sampled trajectory rho_t on [0, tau] the data matrices
//   P = int_0^tau rho_t dt          (Hermitian, PSD)
//   Q = i hbar (rho_tau - rho_0)    (skew-Hermitian)
// satisfy [H, P] = Q for the true Hamiltonian. The unknown is searched in the
// admissible set (Hermitian, zero diagonal) through a real parametrization, so
// the constraints hold exactly for every candidate. The solution is unique iff
// zero is the only admissible matrix commuting with P.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qtopo/dynamics.hpp"
#include "qtopo/linalg.hpp"

namespace qtopo {

/// Composite trapezoid rule over the sub-grid that keeps every
/// `subsample`-th sample (endpoints always included).
HermitianMatrix build_p_trapezoid(const Trajectory& traj, std::size_t subsample = 1);

/// Q = i hbar (rho_tau - rho_0), minus [H0, P] when the node Hamiltonian H0 is
/// known. Supplying H0 without P throws std::invalid_argument.
ComplexMatrix build_q(const DensityOperator& rho0, const DensityOperator& rho_tau, double hbar = 1.0,
                      const std::optional<HermitianMatrix>& known_h0 = std::nullopt,
                      const std::optional<HermitianMatrix>& p = std::nullopt);

/// Search class for the unknown.
///  - hermitian: every Hermitian zero-diagonal matrix (the general case).
///  - real_symmetric: real symmetric zero-diagonal matrices, for networks
///    whose couplings are known to be real (e.g. quantum walks on graphs).
///    A strictly smaller class, so uniqueness is easier to certify.
enum class AdmissibleClass { hermitian, real_symmetric };

std::string to_string(AdmissibleClass c);
/// Throws std::invalid_argument for an unknown name.
AdmissibleClass admissible_class_from_string(const std::string& name);

/// Real parametrization of the admissible set. For every pair i < j (row-major
/// order) there are two parameters x_ij = Re M_ij and y_ij = Im M_ij (only x_ij
/// for the real class); the lower triangle is the conjugate and the diagonal
/// is zero.
class AdmissibleEmbedding {
 public:
  explicit AdmissibleEmbedding(std::size_t d, AdmissibleClass cls = AdmissibleClass::hermitian);

  std::size_t dim() const { return d_; }
  AdmissibleClass admissible_class() const { return cls_; }
  std::size_t parameters_per_pair() const { return cls_ == AdmissibleClass::hermitian ? 2 : 1; }
  std::size_t parameter_count() const { return parameters_per_pair() * pairs_.size(); }

  /// Admissible matrix for parameter vector theta.
  AdmissibleMatrix matrix(const RealVector& theta) const;
  /// Parameters of an admissible matrix (inverse of `matrix`).
  RealVector parameters(const AdmissibleMatrix& m) const;
  /// The matrix generated by parameter p alone set to 1.
  ComplexMatrix basis(std::size_t p) const;
  /// d^2 x d(d-1) complex map S with vec(matrix(theta)) = S * theta.
  ComplexMatrix map() const;

 private:
  std::size_t d_;
  AdmissibleClass cls_;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs_;
};

/// P~ = P^T (x) I - I (x) P, so that vec([M, P]) = P~ vec(M).
ComplexMatrix commutator_operator(const HermitianMatrix& p);

/// Real 2d^2 x n_params system [Re(P~ S); Im(P~ S)].
RealMatrix constrained_system(const HermitianMatrix& p,
                              AdmissibleClass cls = AdmissibleClass::hermitian);

enum class Outcome { unique, non_unique, inconsistent };

std::string to_string(Outcome o);

struct SolveOptions {
  double rank_rtol = kDefaultRankRtol;
  /// Relative least-squares residual above which a full-rank system is
  /// reported as inconsistent.
  double residual_tol = 1e-6;
  AdmissibleClass admissible = AdmissibleClass::hermitian;
};

struct IdentificationReport {
  Outcome outcome = Outcome::non_unique;
  /// Least-squares estimate. Always present; only trusted when unique.
  AdmissibleMatrix estimate;
  std::size_t rank = 0;
  std::size_t required_rank = 0;
  /// ||[M^, P] - Q||_2 / max(||Q||_2, floor)
  double residual = 0.0;
  double sigma_min_retained = 0.0;
  double sigma_max_discarded = 0.0;
  double rank_tolerance = 0.0;
  /// Nonzero estimate that commutes with P (the estimate cannot be unique).
  bool commutes_with_p = false;
  std::optional<double> epsilon;
  AdmissibleClass admissible = AdmissibleClass::hermitian;
  std::vector<std::string> warnings;

  int solvability() const { return outcome == Outcome::unique ? 1 : 0; }
  bool trusted() const { return outcome == Outcome::unique; }
};

/// Floor on ||Q||_2 in the residual denominator.
inline constexpr double kResidualFloor = 1e-12;

/// Solves [M, P] = Q over the admissible set.
IdentificationReport solve_commutator(const HermitianMatrix& p, const ComplexMatrix& q,
                                      const SolveOptions& opts = {});

/// Number of independent nonzero admissible matrices commuting with P; zero
/// iff the identification problem for P has a unique solution.
std::size_t commutant_dimension(const HermitianMatrix& p, double rank_rtol = kDefaultRankRtol,
                                AdmissibleClass cls = AdmissibleClass::hermitian);

/// Thrown when a relative error is requested against a zero reference.
class ZeroReferenceError : public std::domain_error {
 public:
  ZeroReferenceError() : std::domain_error("relative error undefined: reference matrix is zero") {}
};

/// ||estimate - truth||_2 / ||truth||_2
double relative_error(const AdmissibleMatrix& estimate, const AdmissibleMatrix& truth);

struct IdentifyOptions {
  std::size_t subsample = 1;
  double hbar = 1.0;
  SolveOptions solve;
  std::optional<HermitianMatrix> known_h0;
  std::optional<AdmissibleMatrix> truth;
};

/// trapezoid P -> Q -> constrained solve -> relative error (when truth given).
IdentificationReport identify_topology(const Trajectory& traj, const IdentifyOptions& opts = {});

/// report.json body. `extra` is merged in (seed, parameters, ...).
nlohmann::json report_to_json(const IdentificationReport& r,
                              const nlohmann::json& extra = nlohmann::json::object());

}  // namespace qtopo
