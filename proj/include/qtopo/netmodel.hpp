// Benchmark networks: seeded randomness, Erdos-Renyi quantum walks, basis
// initial states and many-body Hamiltonian assembly.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qtopo/dynamics.hpp"
#include "qtopo/linalg.hpp"

namespace qtopo {

/// splitmix64 finalizer; the mixing step of every seed derivation.
std::uint64_t mix64(std::uint64_t x);

/// Deterministic random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; all distributions are derived from raw
/// 64-bit draws here rather than through <random> distributions, whose
/// algorithms are implementation-defined.
///
/// The engine seed is mix64(master ^ mix64(stream)).
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t master, std::uint64_t stream = 0);

  std::uint64_t master() const { return master_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n), by rejection.
  std::size_t index(std::size_t n);
  bool bernoulli(double p);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::uint64_t master_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

/// Binary symmetric zero-diagonal matrix of graph links.
class AdjacencyMatrix {
 public:
  explicit AdjacencyMatrix(std::size_t dim);
  /// Validates binary, symmetric, zero diagonal.
  explicit AdjacencyMatrix(const RealMatrix& a);

  std::size_t dim() const { return static_cast<std::size_t>(a_.rows()); }
  const RealMatrix& matrix() const { return a_; }
  std::size_t edge_count() const;
  void set_link(std::size_t i, std::size_t j, bool on);

  /// The quantum-walk Hamiltonian H = A.
  HermitianMatrix hamiltonian() const;
  AdmissibleMatrix admissible() const;

 private:
  RealMatrix a_;
};

/// Each of the C(d, 2) undirected links is included independently with
/// probability p_link, visited in (i < j) row-major order.
AdjacencyMatrix erdos_renyi(std::size_t d, double p_link, SeededRng& rng);

/// e_k e_k^T with 1-based k.
DensityOperator basis_density(std::size_t d, std::size_t k);

struct NodeTerm {
  double omega = 0.0;
  HermitianMatrix h;
};

/// One term alpha * A_k * A_j of the two-body interaction (k != j, 1-based).
struct CouplingTerm {
  std::size_t k = 0;
  std::size_t j = 0;
  Complex alpha;
  ComplexMatrix a_k;
  ComplexMatrix a_j;
};

struct ManyBodySpec {
  std::size_t dim = 0;
  std::vector<NodeTerm> nodes;
  std::vector<CouplingTerm> couplings;
};

struct AssembledHamiltonian {
  HermitianMatrix h0;
  HermitianMatrix h_int;
  HermitianMatrix total() const;
};

/// H0 = sum omega_k H_k, H_int = sum alpha_kj A_k A_j. The contributions of
/// each unordered pair {k, j} must sum to a Hermitian matrix; otherwise
/// std::invalid_argument names the pair.
AssembledHamiltonian assemble_hamiltonian(const ManyBodySpec& spec);

/// JSON form:
///   {"dim": d,
///    "nodes": [{"omega": w, "operator": <matrix or path>}, ...],
///    "couplings": [{"k": 1, "j": 2, "alpha": a | {"re": a, "im": b},
///                   "a_k": <matrix or path>, "a_j": <matrix or path>}, ...]}
/// Operator paths are resolved relative to `base_dir`.
ManyBodySpec many_body_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
ManyBodySpec read_many_body_file(const std::filesystem::path& path);

}  // namespace qtopo
