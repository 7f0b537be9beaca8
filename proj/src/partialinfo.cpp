#include "qtopo/partialinfo.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "qtopo/matrix_io.hpp"

namespace qtopo {

namespace {

// Common scale for the blocks G_k ~ C L^k: s = max_k (||G_k|| / ||G_0||)^(1/k).
double stack_scale(const std::vector<ComplexMatrix>& g) {
  const double g0 = spectral_norm(g.front());
  double s = 0.0;
  if (g0 > 0.0) {
    for (std::size_t k = 1; k < g.size(); ++k) {
      const double gk = spectral_norm(g[k]);
      if (gk > 0.0) s = std::max(s, std::pow(gk / g0, 1.0 / static_cast<double>(k)));
    }
  }
  return s > 0.0 ? s : 1.0;
}

// Rows [G_0; G_1/s; ...; G_{n-1}/s^{n-1}].
ComplexMatrix scaled_stack(const std::vector<ComplexMatrix>& g, std::size_t first, std::size_t count,
                           double s) {
  const Eigen::Index rows = g.front().rows();
  ComplexMatrix o(rows * static_cast<Eigen::Index>(count), g.front().cols());
  for (std::size_t k = 0; k < count; ++k) {
    o.middleRows(static_cast<Eigen::Index>(k) * rows, rows) =
        g[first + k] / std::pow(s, static_cast<double>(first + k));
  }
  return o;
}

// Fornberg's recursion: weights of the m-th derivative at 0 for nodes x.
std::vector<double> fd_weights(std::size_t m, const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0;
  double c4 = x[0];
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i];
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (std::size_t k = mn; k >= 1; --k) {
          c[i][k] = c1 * (static_cast<double>(k) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        }
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (std::size_t k = mn; k >= 1; --k) {
        c[j][k] = (c4 * c[j][k] - static_cast<double>(k) * c[j][k - 1]) / c3;
      }
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = c[i][m];
  return w;
}

ComplexMatrix projector(const ComplexVector& psi) { return psi * psi.adjoint(); }

ComplexVector basis_ket(std::size_t d, std::size_t k) {
  ComplexVector e = ComplexVector::Zero(static_cast<Eigen::Index>(d));
  e(static_cast<Eigen::Index>(k)) = 1.0;
  return e;
}

}  // namespace

OutputSelector diagonal_selector(std::size_t d) {
  if (d < 1) throw std::invalid_argument("diagonal_selector: d must be >= 1");
  const auto n = static_cast<Eigen::Index>(d);
  RealMatrix c = RealMatrix::Zero(n, n * n);
  for (Eigen::Index k = 0; k < n; ++k) c(k, k * n + k) = 1.0;
  return {d, c};
}

ObservabilityReport observability_rank(const OutputSelector& c, const Liouvillian& l, double rtol) {
  if (static_cast<Eigen::Index>(c.dim * c.dim) != l.matrix().rows()) {
    throw std::invalid_argument("observability_rank: selector and Liouvillian dimensions differ");
  }
  const std::size_t n = c.dim * c.dim;
  std::vector<ComplexMatrix> g;
  g.reserve(n);
  g.emplace_back(c.c.cast<Complex>());
  for (std::size_t k = 1; k < n; ++k) g.emplace_back(g.back() * l.matrix());
  const double s = stack_scale(g);
  const SvdPinv sv = svd_rank_pinv(scaled_stack(g, 0, n, s), rtol);
  ObservabilityReport r;
  r.rank = sv.svd.rank;
  r.required_rank = n;
  r.observable = r.rank == n;
  r.tolerance = sv.svd.tolerance;
  r.sigma_min_retained = sv.svd.sigma_min_retained();
  r.sigma_max_discarded = sv.svd.sigma_max_discarded();
  return r;
}

InitialStateBatch identity_batch(std::size_t d) {
  if (d < 1) throw std::invalid_argument("identity_batch: d must be >= 1");
  const auto n = static_cast<Eigen::Index>(d * d);
  InitialStateBatch b{d, ComplexMatrix::Identity(n, n), {}};
  for (std::size_t j = 1; j <= d; ++j) {
    for (std::size_t i = 1; i <= d; ++i) {
      b.labels.push_back("|" + std::to_string(i) + "><" + std::to_string(j) + "|");
    }
  }
  return b;
}

InitialStateBatch physical_batch(std::size_t d) {
  if (d < 1) throw std::invalid_argument("physical_batch: d must be >= 1");
  const auto n = static_cast<Eigen::Index>(d * d);
  InitialStateBatch b{d, ComplexMatrix(n, n), {}};
  Eigen::Index col = 0;
  for (std::size_t k = 0; k < d; ++k, ++col) {
    b.lambda0.col(col) = vec(projector(basis_ket(d, k)));
    b.labels.push_back("|" + std::to_string(k + 1) + "><" + std::to_string(k + 1) + "|");
  }
  const double r = 1.0 / std::sqrt(2.0);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t j = k + 1; j < d; ++j) {
      const ComplexVector plus = r * (basis_ket(d, k) + basis_ket(d, j));
      const ComplexVector plus_y = r * (basis_ket(d, k) + kI * basis_ket(d, j));
      const std::string kj = std::to_string(k + 1) + std::to_string(j + 1);
      b.lambda0.col(col++) = vec(projector(plus));
      b.labels.push_back("+_" + kj);
      b.lambda0.col(col++) = vec(projector(plus_y));
      b.labels.push_back("+y_" + kj);
    }
  }
  return b;
}

void check_invertible(const InitialStateBatch& batch, double rtol) {
  const auto n = static_cast<Eigen::Index>(batch.dim * batch.dim);
  if (batch.lambda0.rows() != n || batch.lambda0.cols() != n) {
    throw std::invalid_argument("initial-state batch: Lambda0 must be " + std::to_string(n) + "x" +
                                std::to_string(n));
  }
  const SvdPinv sv = svd_rank_pinv(batch.lambda0, rtol);
  if (sv.svd.rank != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("initial-state batch: Lambda0 has rank " +
                                std::to_string(sv.svd.rank) + " < " + std::to_string(n) +
                                "; the states are not linearly independent");
  }
}

DerivativeStacks exact_derivative_stacks(const OutputSelector& c, const Liouvillian& l,
                                         const ComplexMatrix& lambda0, std::size_t order) {
  const auto n = static_cast<Eigen::Index>(c.dim * c.dim);
  if (l.matrix().rows() != n || lambda0.rows() != n) {
    throw std::invalid_argument("exact_derivative_stacks: dimension mismatch");
  }
  DerivativeStacks s;
  s.order = order;
  // Y_k = C (L^k Lambda0): propagate the states, not the selector.
  ComplexMatrix x = lambda0;
  s.y.push_back(c.c.cast<Complex>() * x);
  for (std::size_t k = 1; k <= order; ++k) {
    x = l.matrix() * x;
    s.y.push_back(c.c.cast<Complex>() * x);
  }
  return s;
}

double SampledOutputs::time(std::size_t m) const {
  return (static_cast<double>(m) - static_cast<double>(half_width)) * h;
}

SampledOutputs sample_outputs(const HermitianMatrix& h, const OutputSelector& c,
                              const ComplexMatrix& lambda0, double step, std::size_t half_width,
                              double hbar) {
  if (!(step > 0.0)) throw std::invalid_argument("sample_outputs: step must be positive");
  if (h.dim() != c.dim) throw std::invalid_argument("sample_outputs: dimension mismatch");
  const Propagator prop(h, hbar);
  const ComplexMatrix cc = c.c.cast<Complex>();
  SampledOutputs out{step, half_width, {}};
  for (std::size_t m = 0; m <= 2 * half_width; ++m) {
    out.values.push_back(cc * prop.superoperator(out.time(m)) * lambda0);
  }
  return out;
}

DerivativeStacks estimate_derivative_stacks(const SampledOutputs& outputs, std::size_t order,
                                            double step) {
  if (outputs.values.size() != 2 * outputs.half_width + 1 || !(outputs.h > 0.0)) {
    throw std::invalid_argument("estimate_derivative_stacks: malformed sample grid");
  }
  if (!(step > 0.0)) throw std::invalid_argument("estimate_derivative_stacks: step must be positive");
  const double ratio = step / outputs.h;
  const auto r = static_cast<std::size_t>(std::llround(ratio));
  if (r < 1 || std::abs(ratio - static_cast<double>(r)) > 1e-9 * ratio) {
    throw std::invalid_argument("estimate_derivative_stacks: step must be a multiple of the sampling interval");
  }
  const std::size_t p_max = (order + 1) / 2;
  if (2 * p_max * r > outputs.half_width) {
    throw std::invalid_argument("estimate_derivative_stacks: insufficient samples for order " +
                                std::to_string(order) + " (need " + std::to_string(2 * p_max * r) +
                                " samples on each side of t = 0, have " +
                                std::to_string(outputs.half_width) + ")");
  }
  const std::size_t mid = outputs.half_width;
  DerivativeStacks s;
  s.order = order;
  s.y.push_back(outputs.values[mid]);
  s.error_estimate.push_back(0.0);
  for (std::size_t k = 1; k <= order; ++k) {
    const std::size_t p = (k + 1) / 2;
    std::vector<double> nodes;
    for (std::size_t i = 0; i <= 2 * p; ++i) nodes.push_back(static_cast<double>(i) - static_cast<double>(p));
    const std::vector<double> w = fd_weights(k, nodes);
    auto derivative = [&](std::size_t stride) {
      const double hk = std::pow(static_cast<double>(stride) * outputs.h, static_cast<double>(k));
      ComplexMatrix acc = ComplexMatrix::Zero(outputs.values[mid].rows(), outputs.values[mid].cols());
      for (std::size_t i = 0; i <= 2 * p; ++i) {
        const std::size_t m = mid + i * stride - p * stride;
        acc += w[i] * outputs.values[m];
      }
      return ComplexMatrix(acc / hk);
    };
    const ComplexMatrix d1 = derivative(r);
    const ComplexMatrix d2 = derivative(2 * r);
    const ComplexMatrix rich = (4.0 * d1 - d2) / 3.0;
    const double scale = std::max(spectral_norm(rich), std::numeric_limits<double>::min());
    s.error_estimate.push_back(spectral_norm(rich - d1) / scale);
    s.y.push_back(rich);
  }
  const double amplification = std::numeric_limits<double>::epsilon() *
                               std::pow(step, -static_cast<double>(order));
  if (order >= 3 || amplification > 1e-6) {
    std::ostringstream msg;
    msg << "order-" << order << " finite differences are ill-conditioned: round-off is amplified by ~"
        << amplification << " at step " << step << "; treat the stacks as approximate";
    s.warnings.push_back(msg.str());
  }
  return s;
}

ComplexMatrix physical_to_identity_outputs(std::size_t d, const ComplexMatrix& physical_outputs) {
  const auto n = static_cast<Eigen::Index>(d);
  if (physical_outputs.cols() != n * n) {
    throw std::invalid_argument("physical_to_identity_outputs: expected d^2 columns");
  }
  // Column positions in physical_batch order.
  auto pair_column = [&](std::size_t k, std::size_t j) {
    Eigen::Index col = n;
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a + 1; b < d; ++b, col += 2) {
        if (a == k && b == j) return col;
      }
    }
    throw std::logic_error("pair_column: not found");
  };
  ComplexMatrix out(physical_outputs.rows(), n * n);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < d; ++k) {
      const Eigen::Index target = static_cast<Eigen::Index>(j * d + k);
      if (k == j) {
        out.col(target) = physical_outputs.col(static_cast<Eigen::Index>(k));
        continue;
      }
      const std::size_t lo = std::min(k, j);
      const std::size_t hi = std::max(k, j);
      const auto terms = physical_decomposition(d, lo + 1, hi + 1);
      const Eigen::Index pc = pair_column(lo, hi);
      ComplexVector v = terms[0].coefficient * physical_outputs.col(pc) +
                        terms[1].coefficient * physical_outputs.col(pc + 1) +
                        terms[2].coefficient * physical_outputs.col(static_cast<Eigen::Index>(lo)) +
                        terms[3].coefficient * physical_outputs.col(static_cast<Eigen::Index>(hi));
      // Diagonal outputs of X^dagger are the conjugates of those of X.
      out.col(target) = k < j ? v : ComplexVector(v.conjugate());
    }
  }
  return out;
}

LiouvillianReconstruction reconstruct_liouvillian(const DerivativeStacks& stacks,
                                                  const ComplexMatrix& lambda0, double rtol,
                                                  double hbar) {
  const Eigen::Index n = lambda0.rows();
  if (lambda0.cols() != n || stacks.y.empty()) {
    throw std::invalid_argument("reconstruct_liouvillian: Lambda0 must be square and stacks non-empty");
  }
  const auto nn = static_cast<std::size_t>(n);
  if (stacks.y.size() < nn + 1) {
    throw std::invalid_argument("reconstruct_liouvillian: stacks of order " +
                                std::to_string(stacks.y.size() - 1) + " < d^2 = " + std::to_string(nn));
  }
  const SvdPinv lam = svd_rank_pinv(lambda0, rtol);
  if (lam.svd.rank != nn) {
    throw std::invalid_argument("reconstruct_liouvillian: Lambda0 is not invertible (rank " +
                                std::to_string(lam.svd.rank) + ")");
  }
  std::vector<ComplexMatrix> g;
  for (std::size_t k = 0; k <= nn; ++k) {
    if (stacks.y[k].cols() != n) throw std::invalid_argument("reconstruct_liouvillian: stack width mismatch");
    g.emplace_back(stacks.y[k] * lam.pinv);
  }
  const std::vector<ComplexMatrix> head(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(nn));
  const double s = stack_scale(head);
  const ComplexMatrix o = scaled_stack(g, 0, nn, s);
  // Block k of O' is G_{k+1} / s^k = s * (G_{k+1} / s^{k+1}).
  const ComplexMatrix o_next = scaled_stack(g, 1, nn, s) * s;

  LiouvillianReconstruction r;
  const SvdPinv sv = svd_rank_pinv(o, rtol);
  r.rank = sv.svd.rank;
  r.required_rank = nn;
  r.tolerance = sv.svd.tolerance;
  if (r.rank < nn) {
    r.failure = "pair not observable, L not unique (rank " + std::to_string(r.rank) + " < " +
                std::to_string(nn) + ")";
    return r;
  }
  const ComplexMatrix l = sv.pinv * o_next;
  r.residual = spectral_norm(o * l - o_next) / std::max(spectral_norm(o_next), kRankAbsFloor);
  r.l = Liouvillian(l, hbar);
  return r;
}

HamiltonianExtraction extract_hamiltonian(const Liouvillian& l, double hbar, double tol) {
  if (!(hbar > 0.0)) throw std::invalid_argument("extract_hamiltonian: hbar must be positive");
  const std::size_t d = l.dim();
  const auto n = static_cast<Eigen::Index>(d);
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  auto map = [&](const ComplexMatrix& h) -> ComplexMatrix {
    return (-kI / hbar) * (kron(id, h) - kron(h.transpose(), id));
  };

  // Orthonormal Hermitian basis: E_kk, (E_kj + E_jk)/sqrt2, i(E_jk - E_kj)/sqrt2.
  std::vector<ComplexMatrix> basis;
  for (Eigen::Index k = 0; k < n; ++k) {
    ComplexMatrix e = ComplexMatrix::Zero(n, n);
    e(k, k) = 1.0;
    basis.push_back(e);
  }
  const double r = 1.0 / std::sqrt(2.0);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index j = k + 1; j < n; ++j) {
      ComplexMatrix e = ComplexMatrix::Zero(n, n);
      e(k, j) = e(j, k) = r;
      basis.push_back(e);
      e.setZero();
      e(k, j) = -kI * r;
      e(j, k) = kI * r;
      basis.push_back(e);
    }
  }

  const Eigen::Index rows = n * n * n * n;
  RealMatrix a(2 * rows, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t m = 0; m < basis.size(); ++m) {
    const ComplexMatrix col = map(basis[m]);
    const Eigen::Map<const ComplexVector> v(col.data(), col.size());
    a.col(static_cast<Eigen::Index>(m)) << v.real(), v.imag();
  }
  const Eigen::Map<const ComplexVector> lv(l.matrix().data(), l.matrix().size());
  RealVector b(2 * rows);
  b << lv.real(), lv.imag();

  const RealVector theta = real_svd(a).solve(b);
  ComplexMatrix h = ComplexMatrix::Zero(n, n);
  for (std::size_t m = 0; m < basis.size(); ++m) h += theta(static_cast<Eigen::Index>(m)) * basis[m];

  HamiltonianExtraction out{HermitianMatrix(h), 0.0};
  const double ln = spectral_norm(l.matrix());
  if (ln > 0.0) out.residual = spectral_norm(map(out.h.matrix()) - l.matrix()) / ln;
  if (out.residual > tol) {
    std::ostringstream msg;
    msg << "input is not a closed-system Liouvillian (relative residual " << out.residual << " > "
        << tol << ")";
    throw std::domain_error(msg.str());
  }
  return out;
}

std::vector<DecompositionTerm> physical_decomposition(std::size_t d, std::size_t k, std::size_t j) {
  if (k < 1 || j < 1 || k > d || j > d) {
    throw std::invalid_argument("physical_decomposition: indices (" + std::to_string(k) + "," +
                                std::to_string(j) + ") out of range for d = " + std::to_string(d));
  }
  const ComplexVector ek = basis_ket(d, k - 1);
  const ComplexVector ej = basis_ket(d, j - 1);
  if (k == j) return {{DensityOperator(projector(ek)), 1.0}};
  const double r = 1.0 / std::sqrt(2.0);
  const Complex half_1pi(-0.5, -0.5);
  return {
      {DensityOperator(projector(r * (ek + ej))), 1.0},
      {DensityOperator(projector(r * (ek + kI * ej))), kI},
      {DensityOperator(projector(ek)), half_1pi},
      {DensityOperator(projector(ej)), half_1pi},
  };
}

void write_output_batch(const std::filesystem::path& dir, const SampledOutputs& outputs,
                        const InitialStateBatch& batch, const nlohmann::json& extra) {
  const auto n = static_cast<Eigen::Index>(batch.dim * batch.dim);
  for (const auto& v : outputs.values) {
    if (v.rows() != static_cast<Eigen::Index>(batch.dim) || v.cols() != n) {
      throw std::invalid_argument("write_output_batch: outputs do not match the batch");
    }
    if (v.imag().cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, v.real().cwiseAbs().maxCoeff())) {
      throw std::invalid_argument(
          "write_output_batch: outputs are complex; only physical batches can be written");
    }
  }
  std::filesystem::create_directories(dir);
  nlohmann::json files = nlohmann::json::array();
  char buf[64];
  for (Eigen::Index l = 0; l < n; ++l) {
    std::snprintf(buf, sizeof buf, "output_%03ld.csv", static_cast<long>(l + 1));
    const std::string name = buf;
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << 't';
    for (std::size_t k = 1; k <= batch.dim; ++k) out << ",y_" << k;
    out << '\n';
    for (std::size_t m = 0; m < outputs.values.size(); ++m) {
      std::snprintf(buf, sizeof buf, "%.17g", outputs.time(m));
      out << buf;
      for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(batch.dim); ++k) {
        std::snprintf(buf, sizeof buf, ",%.17g", outputs.values[m](k, l).real());
        out << buf;
      }
      out << '\n';
    }
    files.push_back({{"index", l + 1}, {"file", name}, {"label", batch.labels.at(static_cast<std::size_t>(l))}});
  }
  nlohmann::json manifest{{"dim", batch.dim},
                          {"step", outputs.h},
                          {"half_width", outputs.half_width},
                          {"lambda0", matrix_to_json(batch.lambda0)},
                          {"files", files}};
  for (const auto& [k, v] : extra.items()) manifest[k] = v;
  write_json_file(dir / "manifest.json", manifest);
}

std::pair<SampledOutputs, InitialStateBatch> read_output_batch(const std::filesystem::path& dir) {
  const nlohmann::json m = read_json_file(dir / "manifest.json");
  InitialStateBatch batch;
  batch.dim = m.at("dim").get<std::size_t>();
  batch.lambda0 = matrix_from_json(m.at("lambda0"));
  SampledOutputs out;
  out.h = m.at("step").get<double>();
  out.half_width = m.at("half_width").get<std::size_t>();
  const auto d = static_cast<Eigen::Index>(batch.dim);
  const std::size_t rows = 2 * out.half_width + 1;
  const auto& files = m.at("files");
  if (files.size() != batch.dim * batch.dim) {
    throw std::invalid_argument(dir.string() + "/manifest.json: expected d^2 files");
  }
  out.values.assign(rows, ComplexMatrix::Zero(d, d * d));
  for (std::size_t l = 0; l < files.size(); ++l) {
    batch.labels.push_back(files[l].value("label", ""));
    const auto path = dir / files[l].at("file").get<std::string>();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    std::size_t row = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (row >= rows) throw std::invalid_argument(path.string() + ": too many rows");
      std::stringstream ss(line);
      std::string cell;
      std::getline(ss, cell, ',');
      for (Eigen::Index k = 0; k < d; ++k) {
        if (!std::getline(ss, cell, ',')) throw std::invalid_argument(path.string() + ": short row");
        out.values[row](k, static_cast<Eigen::Index>(l)) = std::stod(cell);
      }
      ++row;
    }
    if (row != rows) throw std::invalid_argument(path.string() + ": expected " + std::to_string(rows) + " rows");
  }
  return {out, batch};
}

}  // namespace qtopo
