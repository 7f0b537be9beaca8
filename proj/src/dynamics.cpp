#include "qtopo/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace qtopo {

DensityOperator::DensityOperator(const ComplexMatrix& rho) : rho_(rho) {
  const double tr_re = rho_.matrix().trace().real();
  if (std::abs(tr_re - 1.0) > kTraceTol) {
    throw std::invalid_argument("DensityOperator: trace is " + std::to_string(tr_re) + ", not 1");
  }
  const HermitianEigen e = eig_hermitian(rho_);
  if (e.values(0) < -kPsdTol) {
    throw std::invalid_argument("DensityOperator: not positive semi-definite (min eigenvalue " +
                                std::to_string(e.values(0)) + ")");
  }
}

Trajectory::Trajectory(double tau, std::size_t n_steps, std::vector<DensityOperator> samples)
    : tau_(tau), n_steps_(n_steps), samples_(std::move(samples)) {
  if (!(tau > 0.0)) throw std::invalid_argument("Trajectory: tau must be positive");
  if (n_steps < 1) throw std::invalid_argument("Trajectory: need at least one step");
  if (samples_.size() != n_steps + 1) {
    throw std::invalid_argument("Trajectory: expected " + std::to_string(n_steps + 1) +
                                " samples, got " + std::to_string(samples_.size()));
  }
  for (const auto& s : samples_) {
    if (s.dim() != samples_.front().dim()) {
      throw std::invalid_argument("Trajectory: samples have inconsistent dimensions");
    }
  }
}

double Trajectory::time(std::size_t k) const {
  return tau_ * static_cast<double>(k) / static_cast<double>(n_steps_);
}

Liouvillian::Liouvillian(ComplexMatrix l, double hbar) : l_(std::move(l)), hbar_(hbar) {
  if (l_.rows() != l_.cols()) throw std::invalid_argument("Liouvillian: matrix must be square");
  const auto d = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(l_.rows()))));
  if (d < 1 || static_cast<Eigen::Index>(d * d) != l_.rows()) {
    throw std::invalid_argument("Liouvillian: size " + std::to_string(l_.rows()) +
                                " is not a perfect square");
  }
  if (!(hbar > 0.0)) throw std::invalid_argument("Liouvillian: hbar must be positive");
  dim_ = d;
}

double Liouvillian::skew_deviation() const {
  const double scale = max_abs(l_);
  if (scale == 0.0) return 0.0;
  return max_abs(l_ + l_.adjoint()) / scale;
}

Liouvillian liouvillian(const HermitianMatrix& h, double hbar) {
  if (!(hbar > 0.0)) throw std::invalid_argument("liouvillian: hbar must be positive");
  const auto d = static_cast<Eigen::Index>(h.dim());
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  ComplexMatrix l = (-kI / hbar) * (kron(id, h.matrix()) - kron(h.matrix().transpose(), id));
  return Liouvillian(std::move(l), hbar);
}

Propagator::Propagator(const HermitianMatrix& h, double hbar) : eig_(eig_hermitian(h)), hbar_(hbar) {
  if (!(hbar > 0.0)) throw std::invalid_argument("Propagator: hbar must be positive");
}

ComplexMatrix Propagator::unitary(double t) const {
  const ComplexVector phases =
      (-kI * t / hbar_ * eig_.values.cast<Complex>()).array().exp().matrix();
  return eig_.vectors * phases.asDiagonal() * eig_.vectors.adjoint();
}

ComplexMatrix Propagator::evolve(const ComplexMatrix& x, double t) const {
  const ComplexMatrix u = unitary(t);
  return u * x * u.adjoint();
}

ComplexMatrix Propagator::superoperator(double t) const {
  // vec(U X U^dagger) = (conj(U) (x) U) vec(X)
  const ComplexMatrix u = unitary(t);
  return kron(u.conjugate(), u);
}

DensityOperator propagate(const HermitianMatrix& h, const DensityOperator& rho0, double t,
                          double hbar) {
  if (!(t >= 0.0)) throw std::invalid_argument("propagate: t must be >= 0");
  if (h.dim() != rho0.dim()) throw std::invalid_argument("propagate: dimension mismatch");
  if (t == 0.0) return rho0;
  return DensityOperator(Propagator(h, hbar).evolve(rho0.matrix(), t));
}

std::size_t steps_for(double tau, double dt) {
  if (!(tau > 0.0) || !(dt > 0.0)) throw std::invalid_argument("tau and dt must be positive");
  const double ratio = tau / dt;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, n)) {
    throw std::invalid_argument("tau / dt = " + std::to_string(ratio) + " is not an integer");
  }
  return static_cast<std::size_t>(n);
}

Trajectory sample_trajectory(const HermitianMatrix& h, const DensityOperator& rho0, double tau,
                             double dt, double hbar) {
  if (h.dim() != rho0.dim()) throw std::invalid_argument("sample_trajectory: dimension mismatch");
  const std::size_t n = steps_for(tau, dt);
  const Propagator prop(h, hbar);
  std::vector<DensityOperator> samples;
  samples.reserve(n + 1);
  samples.push_back(rho0);
  for (std::size_t k = 1; k <= n; ++k) {
    const double t = tau * static_cast<double>(k) / static_cast<double>(n);
    samples.emplace_back(prop.evolve(rho0.matrix(), t));
  }
  return Trajectory(tau, n, std::move(samples));
}

HermitianMatrix exact_gram(const HermitianMatrix& h, const DensityOperator& rho0, double tau,
                           double hbar) {
  if (!(tau > 0.0)) throw std::invalid_argument("exact_gram: tau must be positive");
  if (h.dim() != rho0.dim()) throw std::invalid_argument("exact_gram: dimension mismatch");
  const HermitianEigen e = eig_hermitian(h);
  const ComplexMatrix& v = e.vectors;
  ComplexMatrix g = v.adjoint() * rho0.matrix() * v;
  const auto d = g.rows();
  for (Eigen::Index k = 0; k < d; ++k) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double omega = (e.values(j) - e.values(k)) / hbar;
      const double x = omega * tau;
      Complex weight;
      if (std::abs(x) < kDegenerateFrequencyTol) {
        weight = tau;
      } else {
        // (exp(-i x) - 1) / (-i omega), written without cancellation.
        const double s = std::sin(0.5 * x);
        const Complex num(-2.0 * s * s, -std::sin(x));
        weight = num / (-kI * omega);
      }
      g(j, k) *= weight;
    }
  }
  return HermitianMatrix(v * g * v.adjoint());
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const auto d = static_cast<Eigen::Index>(traj.dim());
  out << 't';
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      out << ",re_" << i + 1 << '_' << j + 1 << ",im_" << i + 1 << '_' << j + 1;
    }
  }
  out << '\n';
  char buf[64];
  for (std::size_t k = 0; k < traj.samples().size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", traj.time(k));
    out << buf;
    const ComplexMatrix& rho = traj.samples()[k].matrix();
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index i = 0; i < d; ++i) {
        std::snprintf(buf, sizeof buf, ",%.17g", rho(i, j).real());
        out << buf;
        std::snprintf(buf, sizeof buf, ",%.17g", rho(i, j).imag());
        out << buf;
      }
    }
    out << '\n';
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_trajectory_csv(out, traj);
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path.string() + ": empty file");
  std::size_t columns = 1;
  for (char c : line) columns += (c == ',');
  if (columns < 3 || (columns - 1) % 2 != 0) {
    throw std::invalid_argument(path.string() + ": malformed trajectory header");
  }
  const std::size_t entries = (columns - 1) / 2;
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(entries))));
  if (static_cast<std::size_t>(d * d) != entries) {
    throw std::invalid_argument(path.string() + ": header does not describe a square matrix");
  }
  std::vector<double> times;
  std::vector<DensityOperator> samples;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    values.reserve(columns);
    while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
    if (values.size() != columns) {
      throw std::invalid_argument(path.string() + ": row " + std::to_string(row) + " has " +
                                  std::to_string(values.size()) + " cells");
    }
    ComplexMatrix rho(d, d);
    std::size_t c = 1;
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index i = 0; i < d; ++i, c += 2) rho(i, j) = Complex(values[c], values[c + 1]);
    }
    times.push_back(values[0]);
    samples.emplace_back(rho);
  }
  if (samples.size() < 2) throw std::invalid_argument(path.string() + ": need at least 2 samples");
  const std::size_t n = samples.size() - 1;
  const double tau = times.back();
  if (times.front() != 0.0) throw std::invalid_argument(path.string() + ": first time must be 0");
  const double dt = tau / static_cast<double>(n);
  for (std::size_t k = 0; k <= n; ++k) {
    if (std::abs(times[k] - dt * static_cast<double>(k)) > 1e-9 * std::max(1.0, tau)) {
      throw std::invalid_argument(path.string() + ": time grid is not uniform at row " +
                                  std::to_string(k + 2));
    }
  }
  return Trajectory(tau, n, std::move(samples));
}

}  // namespace qtopo
