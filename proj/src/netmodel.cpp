#include "qtopo/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "qtopo/matrix_io.hpp"

namespace qtopo {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SeededRng::SeededRng(std::uint64_t master, std::uint64_t stream)
    : master_(master), stream_(stream), engine_(mix64(master ^ mix64(stream))) {}

std::uint64_t SeededRng::next_u64() { return engine_(); }

double SeededRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::size_t SeededRng::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("SeededRng::index: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

bool SeededRng::bernoulli(double p) { return uniform() < p; }

double SeededRng::normal() {
  // 1 - u lies in (0, 1], so the logarithm is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

AdjacencyMatrix::AdjacencyMatrix(std::size_t dim)
    : a_(RealMatrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))) {
  if (dim < 1) throw std::invalid_argument("AdjacencyMatrix: dimension must be >= 1");
}

AdjacencyMatrix::AdjacencyMatrix(const RealMatrix& a) : a_(a) {
  if (a.rows() != a.cols() || a.rows() < 1) {
    throw std::invalid_argument("AdjacencyMatrix: matrix must be square and non-empty");
  }
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (a(i, i) != 0.0) throw std::invalid_argument("AdjacencyMatrix: nonzero diagonal");
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) != 0.0 && a(i, j) != 1.0) {
        throw std::invalid_argument("AdjacencyMatrix: entries must be 0 or 1");
      }
      if (a(i, j) != a(j, i)) throw std::invalid_argument("AdjacencyMatrix: not symmetric");
    }
  }
}

std::size_t AdjacencyMatrix::edge_count() const {
  return static_cast<std::size_t>(a_.sum() / 2.0);
}

void AdjacencyMatrix::set_link(std::size_t i, std::size_t j, bool on) {
  if (i == j) throw std::invalid_argument("AdjacencyMatrix: self-loops are not allowed");
  const auto r = static_cast<Eigen::Index>(i);
  const auto c = static_cast<Eigen::Index>(j);
  a_(r, c) = a_(c, r) = on ? 1.0 : 0.0;
}

HermitianMatrix AdjacencyMatrix::hamiltonian() const { return HermitianMatrix::from_real(a_); }

AdmissibleMatrix AdjacencyMatrix::admissible() const {
  return AdmissibleMatrix::from_upper(a_.cast<Complex>());
}

AdjacencyMatrix erdos_renyi(std::size_t d, double p_link, SeededRng& rng) {
  if (d < 2) throw std::invalid_argument("erdos_renyi: need d >= 2");
  if (!(p_link >= 0.0 && p_link <= 1.0)) {
    throw std::invalid_argument("erdos_renyi: p_link must lie in [0, 1]");
  }
  AdjacencyMatrix a(d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      if (rng.bernoulli(p_link)) a.set_link(i, j, true);
    }
  }
  return a;
}

DensityOperator basis_density(std::size_t d, std::size_t k) {
  if (d < 1 || k < 1 || k > d) {
    throw std::invalid_argument("basis_density: index " + std::to_string(k) +
                                " out of range for d = " + std::to_string(d));
  }
  const auto n = static_cast<Eigen::Index>(d);
  ComplexMatrix rho = ComplexMatrix::Zero(n, n);
  rho(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k - 1)) = 1.0;
  return DensityOperator(rho);
}

HermitianMatrix AssembledHamiltonian::total() const {
  return HermitianMatrix(h0.matrix() + h_int.matrix());
}

AssembledHamiltonian assemble_hamiltonian(const ManyBodySpec& spec) {
  const auto d = static_cast<Eigen::Index>(spec.dim);
  if (d < 1) throw std::invalid_argument("assemble_hamiltonian: dim must be >= 1");

  ComplexMatrix h0 = ComplexMatrix::Zero(d, d);
  for (std::size_t n = 0; n < spec.nodes.size(); ++n) {
    const auto& node = spec.nodes[n];
    if (node.h.dim() != spec.dim) {
      throw std::invalid_argument("assemble_hamiltonian: node " + std::to_string(n + 1) +
                                  " operator has the wrong dimension");
    }
    h0 += node.omega * node.h.matrix();
  }

  // Group terms by unordered pair so the Hermiticity diagnostic can name it.
  std::vector<std::pair<std::pair<std::size_t, std::size_t>, ComplexMatrix>> pairs;
  for (const auto& c : spec.couplings) {
    if (c.k == c.j || c.k < 1 || c.j < 1) {
      throw std::invalid_argument("assemble_hamiltonian: coupling (" + std::to_string(c.k) + "," +
                                  std::to_string(c.j) + ") must join two distinct nodes");
    }
    if (c.a_k.rows() != d || c.a_k.cols() != d || c.a_j.rows() != d || c.a_j.cols() != d) {
      throw std::invalid_argument("assemble_hamiltonian: coupling (" + std::to_string(c.k) + "," +
                                  std::to_string(c.j) + ") has operators of the wrong size");
    }
    const std::pair<std::size_t, std::size_t> key = std::minmax(c.k, c.j);
    const ComplexMatrix term = c.alpha * c.a_k * c.a_j;
    auto it = std::find_if(pairs.begin(), pairs.end(), [&](const auto& p) { return p.first == key; });
    if (it == pairs.end()) {
      pairs.emplace_back(key, term);
    } else {
      it->second += term;
    }
  }

  ComplexMatrix h_int = ComplexMatrix::Zero(d, d);
  for (const auto& [key, sum] : pairs) {
    const double asym = spectral_norm(sum - sum.adjoint());
    if (asym > 1e-12 * std::max(spectral_norm(sum), 1e-300) && asym > 0.0) {
      throw std::invalid_argument("assemble_hamiltonian: couplings between nodes " +
                                  std::to_string(key.first) + " and " + std::to_string(key.second) +
                                  " do not sum to a Hermitian operator");
    }
    h_int += sum;
  }
  return {HermitianMatrix(h0), HermitianMatrix(h_int)};
}

namespace {

ComplexMatrix operator_from(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (j.is_string()) return read_matrix_file(base_dir / j.get<std::string>());
  return matrix_from_json(j);
}

Complex coefficient_from(const nlohmann::json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_object()) return {j.value("re", 0.0), j.value("im", 0.0)};
  throw std::invalid_argument("many-body JSON: alpha must be a number or {re, im}");
}

}  // namespace

ManyBodySpec many_body_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object() || !j.contains("dim")) {
    throw std::invalid_argument("many-body JSON: expected an object with 'dim'");
  }
  ManyBodySpec spec;
  spec.dim = j.at("dim").get<std::size_t>();
  for (const auto& node : j.value("nodes", nlohmann::json::array())) {
    spec.nodes.push_back({node.at("omega").get<double>(),
                          HermitianMatrix(operator_from(node.at("operator"), base_dir))});
  }
  for (const auto& c : j.value("couplings", nlohmann::json::array())) {
    spec.couplings.push_back({c.at("k").get<std::size_t>(), c.at("j").get<std::size_t>(),
                              coefficient_from(c.at("alpha")), operator_from(c.at("a_k"), base_dir),
                              operator_from(c.at("a_j"), base_dir)});
  }
  return spec;
}

ManyBodySpec read_many_body_file(const std::filesystem::path& path) {
  return many_body_from_json(read_json_file(path), path.parent_path());
}

}  // namespace qtopo
