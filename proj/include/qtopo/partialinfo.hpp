// Partial-information identification: only the populations (the diagonal of
// rho_t) are measured. The generator L is recovered from the derivatives of
// these outputs at t = 0 for d^2 linearly independent initial states,
// provided the pair (C, L) is observable.
//
// Limitation: a zero-diagonal H always satisfies L vec(H) = 0 and
// C vec(H) = 0, so the pair (C, L) is never observable for a purely
// interaction (admissible) Hamiltonian. Reconstruction then reports failure.

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qtopo/dynamics.hpp"
#include "qtopo/linalg.hpp"

namespace qtopo {

/// C in R^{d x d^2} with C(k, k*d + k) = 1 (0-based), so C vec(rho) = diag(rho).
struct OutputSelector {
  std::size_t dim = 0;
  RealMatrix c;
};

OutputSelector diagonal_selector(std::size_t d);

struct ObservabilityReport {
  std::size_t rank = 0;
  std::size_t required_rank = 0;
  bool observable = false;
  double tolerance = 0.0;
  double sigma_min_retained = 0.0;
  double sigma_max_discarded = 0.0;
};

/// Numerical rank of the d^3 x d^2 stack [C; C L; ...; C L^{d^2-1}]. Block k
/// is divided by s^k, s estimated from the blocks themselves, which leaves the
/// exact rank unchanged but keeps the powers of L on a common scale.
ObservabilityReport observability_rank(const OutputSelector& c, const Liouvillian& l,
                                       double rtol = kDefaultRankRtol);

/// d^2 initial states as the columns vec(rho_0^(l)) of Lambda0.
struct InitialStateBatch {
  std::size_t dim = 0;
  ComplexMatrix lambda0;
  /// Human-readable label per column.
  std::vector<std::string> labels;
};

/// Lambda0 = I: column j*d + i (0-based) is vec(|i><j|). Not physical for the
/// off-diagonal columns.
InitialStateBatch identity_batch(std::size_t d);

/// d^2 preparable states: |k><k|, then |+_kj><+_kj| and |+y_kj><+y_kj| for
/// k < j. Linearly independent, hence a valid Lambda0.
InitialStateBatch physical_batch(std::size_t d);

/// Throws std::invalid_argument unless Lambda0 has rank d^2.
void check_invertible(const InitialStateBatch& batch, double rtol = kDefaultRankRtol);

/// Y_k = C L^k Lambda0 for k = 0..order.
struct DerivativeStacks {
  std::size_t order = 0;
  std::vector<ComplexMatrix> y;
  /// Per-order error estimate (finite differences only; empty for exact).
  std::vector<double> error_estimate;
  std::vector<std::string> warnings;
};

/// Exact stacks by repeated multiplication.
DerivativeStacks exact_derivative_stacks(const OutputSelector& c, const Liouvillian& l,
                                         const ComplexMatrix& lambda0, std::size_t order);

/// Outputs Y(t_m) = C exp(L t_m) Lambda0 on the symmetric grid
/// t_m = (m - half_width) * h, m = 0..2*half_width.
struct SampledOutputs {
  double h = 0.0;
  std::size_t half_width = 0;
  std::vector<ComplexMatrix> values;

  double time(std::size_t m) const;
};

SampledOutputs sample_outputs(const HermitianMatrix& h, const OutputSelector& c,
                              const ComplexMatrix& lambda0, double step, std::size_t half_width,
                              double hbar = 1.0);

/// Central finite differences of order k with the narrowest symmetric
/// stencil, Richardson-extrapolated from steps `step` and 2*`step`.
/// `step` must be a multiple of the sampling interval. Truncation error is
/// O(step^4); round-off grows like eps * step^-k, so high orders are
/// ill-conditioned and a warning is attached.
DerivativeStacks estimate_derivative_stacks(const SampledOutputs& outputs, std::size_t order,
                                            double step);

/// Outputs of a non-physical batch recombined from physical outputs: column
/// vec(|k><j|) of the identity batch equals the decomposition-weighted sum
/// of the physical_batch columns.
ComplexMatrix physical_to_identity_outputs(std::size_t d, const ComplexMatrix& physical_outputs);

struct LiouvillianReconstruction {
  std::optional<Liouvillian> l;
  std::size_t rank = 0;
  std::size_t required_rank = 0;
  double tolerance = 0.0;
  /// Relative least-squares residual of O L = O'.
  double residual = 0.0;
  std::string failure;

  bool ok() const { return l.has_value(); }
};

/// G_k = Y_k Lambda0^{-1} (= C L^k), O = [G_0; ...; G_{n-1}],
/// O' = [G_1; ...; G_n] with n = d^2; solves O L = O' when rank(O) = d^2.
LiouvillianReconstruction reconstruct_liouvillian(const DerivativeStacks& stacks,
                                                  const ComplexMatrix& lambda0,
                                                  double rtol = kDefaultRankRtol,
                                                  double hbar = 1.0);

struct HamiltonianExtraction {
  HermitianMatrix h;  // traceless representative
  double residual = 0.0;  // ||map(H) - L||_2 / ||L||_2
};

/// Least-squares inverse of H -> -(i/hbar)(I (x) H - H^T (x) I). The map's
/// kernel is {c I}; the minimum-norm solution is the traceless one. Throws
/// std::domain_error("input is not a closed-system Liouvillian") when the
/// relative residual exceeds `tol`.
HamiltonianExtraction extract_hamiltonian(const Liouvillian& l, double hbar = 1.0,
                                          double tol = 1e-6);

struct DecompositionTerm {
  DensityOperator state;
  Complex coefficient;
};

/// |k><j| (1-based) as a combination of preparable states:
///   |k><j| = |+><+| + i |+y><+y| - (1+i)/2 (|k><k| + |j><j|)
/// with |+> = (|k> + |j>)/sqrt2, |+y> = (|k> + i|j>)/sqrt2. One term if k = j.
std::vector<DecompositionTerm> physical_decomposition(std::size_t d, std::size_t k, std::size_t j);

/// One CSV per column l of the batch ("t,y_1,...,y_d", real parts of the
/// outputs) plus manifest.json mapping l to its file and listing Lambda0.
void write_output_batch(const std::filesystem::path& dir, const SampledOutputs& outputs,
                        const InitialStateBatch& batch, const nlohmann::json& extra = {});
/// Reads a batch written by write_output_batch.
std::pair<SampledOutputs, InitialStateBatch> read_output_batch(const std::filesystem::path& dir);

}  // namespace qtopo
