#include "qtopo/identify.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "qtopo/matrix_io.hpp"

namespace qtopo {

HermitianMatrix build_p_trapezoid(const Trajectory& traj, std::size_t subsample) {
  const std::size_t n = traj.n_steps();
  if (subsample < 1 || n % subsample != 0) {
    throw std::invalid_argument("build_p_trapezoid: subsample " + std::to_string(subsample) +
                                " does not divide n_s = " + std::to_string(n));
  }
  const auto& s = traj.samples();
  const auto d = static_cast<Eigen::Index>(traj.dim());
  ComplexMatrix p = ComplexMatrix::Zero(d, d);
  for (std::size_t k = subsample; k <= n; k += subsample) {
    const double width = traj.time(k) - traj.time(k - subsample);
    p += (0.5 * width) * (s[k - subsample].matrix() + s[k].matrix());
  }
  return HermitianMatrix(p);
}

ComplexMatrix build_q(const DensityOperator& rho0, const DensityOperator& rho_tau, double hbar,
                      const std::optional<HermitianMatrix>& known_h0,
                      const std::optional<HermitianMatrix>& p) {
  if (rho0.dim() != rho_tau.dim()) throw std::invalid_argument("build_q: dimension mismatch");
  if (!(hbar > 0.0)) throw std::invalid_argument("build_q: hbar must be positive");
  ComplexMatrix q = (kI * hbar) * (rho_tau.matrix() - rho0.matrix());
  if (known_h0) {
    if (!p) throw std::invalid_argument("build_q: a known H0 requires P");
    if (known_h0->dim() != rho0.dim() || p->dim() != rho0.dim()) {
      throw std::invalid_argument("build_q: dimension mismatch");
    }
    q -= commutator(known_h0->matrix(), p->matrix());
  }
  return q;
}

std::string to_string(AdmissibleClass c) {
  return c == AdmissibleClass::hermitian ? "hermitian" : "real_symmetric";
}

AdmissibleClass admissible_class_from_string(const std::string& name) {
  if (name == "hermitian") return AdmissibleClass::hermitian;
  if (name == "real_symmetric") return AdmissibleClass::real_symmetric;
  throw std::invalid_argument("unknown admissible class '" + name +
                              "' (expected hermitian or real_symmetric)");
}

AdmissibleEmbedding::AdmissibleEmbedding(std::size_t d, AdmissibleClass cls) : d_(d), cls_(cls) {
  if (d < 2) throw std::invalid_argument("AdmissibleEmbedding: need d >= 2");
  const auto n = static_cast<Eigen::Index>(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) pairs_.emplace_back(i, j);
  }
}

AdmissibleMatrix AdmissibleEmbedding::matrix(const RealVector& theta) const {
  if (static_cast<std::size_t>(theta.size()) != parameter_count()) {
    throw std::invalid_argument("AdmissibleEmbedding: expected " +
                                std::to_string(parameter_count()) + " parameters");
  }
  const auto n = static_cast<Eigen::Index>(d_);
  ComplexMatrix upper = ComplexMatrix::Zero(n, n);
  const std::size_t w = parameters_per_pair();
  for (std::size_t q = 0; q < pairs_.size(); ++q) {
    const auto [i, j] = pairs_[q];
    const double im = w == 2 ? theta(static_cast<Eigen::Index>(2 * q + 1)) : 0.0;
    upper(i, j) = Complex(theta(static_cast<Eigen::Index>(w * q)), im);
  }
  return AdmissibleMatrix::from_upper(upper);
}

RealVector AdmissibleEmbedding::parameters(const AdmissibleMatrix& m) const {
  if (m.dim() != d_) throw std::invalid_argument("AdmissibleEmbedding: dimension mismatch");
  RealVector theta(static_cast<Eigen::Index>(parameter_count()));
  const std::size_t w = parameters_per_pair();
  for (std::size_t q = 0; q < pairs_.size(); ++q) {
    const auto [i, j] = pairs_[q];
    theta(static_cast<Eigen::Index>(w * q)) = m.matrix()(i, j).real();
    if (w == 2) theta(static_cast<Eigen::Index>(2 * q + 1)) = m.matrix()(i, j).imag();
  }
  return theta;
}

ComplexMatrix AdmissibleEmbedding::basis(std::size_t p) const {
  if (p >= parameter_count()) throw std::out_of_range("AdmissibleEmbedding: parameter index");
  const auto n = static_cast<Eigen::Index>(d_);
  const std::size_t w = parameters_per_pair();
  const auto [i, j] = pairs_[p / w];
  ComplexMatrix e = ComplexMatrix::Zero(n, n);
  if (p % w == 0) {
    e(i, j) = 1.0;
    e(j, i) = 1.0;
  } else {
    e(i, j) = kI;
    e(j, i) = -kI;
  }
  return e;
}

ComplexMatrix AdmissibleEmbedding::map() const {
  const auto n = static_cast<Eigen::Index>(d_);
  ComplexMatrix s(n * n, static_cast<Eigen::Index>(parameter_count()));
  for (std::size_t p = 0; p < parameter_count(); ++p) s.col(static_cast<Eigen::Index>(p)) = vec(basis(p));
  return s;
}

ComplexMatrix commutator_operator(const HermitianMatrix& p) {
  const auto n = static_cast<Eigen::Index>(p.dim());
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  return kron(p.matrix().transpose(), id) - kron(id, p.matrix());
}

RealMatrix constrained_system(const HermitianMatrix& p, AdmissibleClass cls) {
  const std::size_t d = p.dim();
  const AdmissibleEmbedding emb(d, cls);
  const auto n = static_cast<Eigen::Index>(d);
  const ComplexMatrix& pm = p.matrix();
  RealMatrix a(2 * n * n, static_cast<Eigen::Index>(emb.parameter_count()));
  ComplexMatrix c(n, n);
  Eigen::Index col = 0;
  // Column for E = a e_i e_j^dagger + b e_j e_i^dagger is vec(E P - P E);
  // only two rows and two columns of the commutator are touched.
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const std::pair<Complex, Complex> kinds[] = {{1.0, 1.0}, {kI, -kI}};
      for (std::size_t kind = 0; kind < emb.parameters_per_pair(); ++kind) {
        const auto [ca, cb] = kinds[kind];
        c.setZero();
        c.row(i) += ca * pm.row(j);
        c.row(j) += cb * pm.row(i);
        c.col(j) -= ca * pm.col(i);
        c.col(i) -= cb * pm.col(j);
        const Eigen::Map<const ComplexVector> v(c.data(), c.size());
        a.col(col).head(n * n) = v.real();
        a.col(col).tail(n * n) = v.imag();
        ++col;
      }
    }
  }
  return a;
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::unique:
      return "unique";
    case Outcome::non_unique:
      return "non_unique";
    case Outcome::inconsistent:
      return "inconsistent";
  }
  return "unknown";
}

IdentificationReport solve_commutator(const HermitianMatrix& p, const ComplexMatrix& q,
                                      const SolveOptions& opts) {
  const std::size_t d = p.dim();
  if (q.rows() != static_cast<Eigen::Index>(d) || q.cols() != static_cast<Eigen::Index>(d)) {
    throw std::invalid_argument("solve_commutator: P is " + std::to_string(d) + "x" +
                                std::to_string(d) + " but Q is " + std::to_string(q.rows()) + "x" +
                                std::to_string(q.cols()));
  }
  if (!(opts.rank_rtol > 0.0)) throw std::invalid_argument("solve_commutator: rtol must be positive");
  if (!all_finite(q)) throw std::invalid_argument("solve_commutator: Q has non-finite entries");

  IdentificationReport r;
  r.admissible = opts.admissible;
  const double q_norm = spectral_norm(q);
  if (max_abs(q + q.adjoint()) > 1e-10 * std::max(max_abs(q), kResidualFloor)) {
    r.warnings.emplace_back("Q is not skew-Hermitian; its Hermitian part cannot be matched");
  }

  const AdmissibleEmbedding emb(d, opts.admissible);
  const RealMatrix a = constrained_system(p, opts.admissible);
  const ComplexVector qv = vec(q);
  RealVector b(2 * qv.size());
  b << qv.real(), qv.imag();

  const RealSvd svd = real_svd(a, opts.rank_rtol);
  r.rank = svd.rank;
  r.required_rank = emb.parameter_count();
  r.rank_tolerance = svd.tolerance;
  r.sigma_min_retained = svd.sigma_min_retained();
  r.sigma_max_discarded = svd.sigma_max_discarded();
  r.estimate = emb.matrix(svd.solve(b));

  const ComplexMatrix mismatch = commutator(r.estimate.matrix(), p.matrix()) - q;
  r.residual = spectral_norm(mismatch) / std::max(q_norm, kResidualFloor);

  if (r.rank < r.required_rank) {
    r.outcome = Outcome::non_unique;
  } else if (r.residual <= opts.residual_tol) {
    r.outcome = Outcome::unique;
  } else {
    r.outcome = Outcome::inconsistent;
  }

  const double m_norm = spectral_norm(r.estimate.matrix());
  if (m_norm > 0.0) {
    const double comm = spectral_norm(commutator(r.estimate.matrix(), p.matrix()));
    r.commutes_with_p = comm <= 1e-9 * m_norm * std::max(spectral_norm(p.matrix()), kResidualFloor);
  }

  if (svd.rank > 0) {
    // Flag rank decisions made within a decade of the threshold.
    const bool close_retained = r.sigma_min_retained < 10.0 * svd.tolerance;
    const bool close_discarded = r.sigma_max_discarded > 0.1 * svd.tolerance;
    if (close_retained || close_discarded) {
      std::ostringstream msg;
      msg << "rank decision within a decade of the threshold " << svd.tolerance
          << " (sigma_min_retained " << r.sigma_min_retained << ", sigma_max_discarded "
          << r.sigma_max_discarded << ")";
      r.warnings.push_back(msg.str());
    }
  }
  if (r.outcome == Outcome::non_unique) {
    r.warnings.emplace_back("estimate is not unique; its error is uncontrolled");
  }
  return r;
}

std::size_t commutant_dimension(const HermitianMatrix& p, double rank_rtol, AdmissibleClass cls) {
  const RealSvd svd = real_svd(constrained_system(p, cls), rank_rtol);
  return AdmissibleEmbedding(p.dim(), cls).parameter_count() - svd.rank;
}

double relative_error(const AdmissibleMatrix& estimate, const AdmissibleMatrix& truth) {
  if (estimate.dim() != truth.dim()) throw std::invalid_argument("relative_error: dimension mismatch");
  const double ref = spectral_norm(truth.matrix());
  if (ref == 0.0) throw ZeroReferenceError();
  return spectral_norm(estimate.matrix() - truth.matrix()) / ref;
}

IdentificationReport identify_topology(const Trajectory& traj, const IdentifyOptions& opts) {
  const HermitianMatrix p = build_p_trapezoid(traj, opts.subsample);
  const ComplexMatrix q = build_q(traj.front(), traj.back(), opts.hbar, opts.known_h0, p);
  IdentificationReport r = solve_commutator(p, q, opts.solve);
  if (opts.truth) {
    try {
      r.epsilon = relative_error(r.estimate, *opts.truth);
    } catch (const ZeroReferenceError&) {
      r.warnings.emplace_back("ground truth is zero; relative error undefined");
    }
  }
  return r;
}

nlohmann::json report_to_json(const IdentificationReport& r, const nlohmann::json& extra) {
  nlohmann::json j{
      {"outcome", to_string(r.outcome)},
      {"rank", r.rank},
      {"required_rank", r.required_rank},
      {"residual", r.residual},
      {"solvability", r.solvability()},
      {"epsilon", r.epsilon ? nlohmann::json(*r.epsilon) : nlohmann::json(nullptr)},
      {"sigma_min_retained", r.sigma_min_retained},
      {"sigma_max_discarded", r.sigma_max_discarded},
      {"rank_tolerance", r.rank_tolerance},
      {"commutes_with_p", r.commutes_with_p},
      {"trusted", r.trusted()},
      {"admissible_class", to_string(r.admissible)},
      {"warnings", r.warnings},
      {"estimate", matrix_to_json(r.estimate.matrix())},
  };
  if (!j.contains("seed")) j["seed"] = nullptr;
  if (!j.contains("parameters")) j["parameters"] = nlohmann::json::object();
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j;
}

}  // namespace qtopo
