#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "qtopo/partialinfo.hpp"
#include "test_support.hpp"

using namespace qtopo;
using qtopo::test::diag2;
using qtopo::test::random_hermitian;
using qtopo::test::sigma_x;

namespace {

HermitianMatrix observable_pair_h() {
  ComplexMatrix h(2, 2);
  h << 1, 1, 1, -1;
  return HermitianMatrix(h);
}

ComplexMatrix ket_bra(std::size_t d, std::size_t k, std::size_t j) {
  const auto n = static_cast<Eigen::Index>(d);
  ComplexMatrix m = ComplexMatrix::Zero(n, n);
  m(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(j - 1)) = 1.0;
  return m;
}

HermitianMatrix traceless(const HermitianMatrix& h) {
  const auto n = static_cast<Eigen::Index>(h.dim());
  return HermitianMatrix(ComplexMatrix(
      h.matrix() - (h.matrix().trace() / static_cast<double>(n)) * ComplexMatrix::Identity(n, n)));
}

}  // namespace

TEST(Selector, PicksDiagonal) {
  const OutputSelector c = diagonal_selector(2);
  EXPECT_EQ(c.c.rows(), 2);
  EXPECT_EQ(c.c.cols(), 4);
  EXPECT_EQ(c.c(0, 0), 1.0);
  EXPECT_EQ(c.c(1, 3), 1.0);
  EXPECT_EQ(c.c.sum(), 2.0);
  ComplexMatrix rho(3, 3);
  rho << 0.2, 1, 2, 3, 0.3, 4, 5, 6, 0.5;
  const OutputSelector c3 = diagonal_selector(3);
  EXPECT_EQ(ComplexVector(c3.c.cast<Complex>() * vec(rho)), ComplexVector(rho.diagonal()));
}

TEST(Observability, ZeroGeneratorCollapsesToSelector) {
  for (std::size_t d = 2; d <= 4; ++d) {
    const ObservabilityReport r = observability_rank(diagonal_selector(d), liouvillian(HermitianMatrix::zero(d)));
    EXPECT_EQ(r.rank, d);
    EXPECT_EQ(r.required_rank, d * d);
    EXPECT_FALSE(r.observable);
  }
}

TEST(Observability, Examples) {
  const ObservabilityReport good = observability_rank(diagonal_selector(2), liouvillian(observable_pair_h()));
  EXPECT_EQ(good.rank, 4u);
  EXPECT_TRUE(good.observable);
  const ObservabilityReport bad = observability_rank(diagonal_selector(2), liouvillian(HermitianMatrix(sigma_x())));
  EXPECT_EQ(bad.rank, 3u);
  EXPECT_FALSE(bad.observable);
  // Populations of a diagonal Hamiltonian never move.
  ComplexMatrix diag = ComplexMatrix::Zero(3, 3);
  diag.diagonal() << 1, 2, 4;
  EXPECT_EQ(observability_rank(diagonal_selector(3), liouvillian(HermitianMatrix(diag))).rank, 3u);
}

TEST(Observability, ZeroDiagonalNeverObservable) {
  std::mt19937_64 gen(1);
  for (std::size_t d = 2; d <= 4; ++d) {
    for (int trial = 0; trial < 10; ++trial) {
      ComplexMatrix h = random_hermitian(d, gen).matrix();
      h.diagonal().setZero();
      const Liouvillian l = liouvillian(HermitianMatrix(h));
      EXPECT_LE((l.matrix() * vec(h)).norm(), 1e-12);
      EXPECT_LE(observability_rank(diagonal_selector(d), l).rank, d * d - 1);
    }
  }
}

TEST(Observability, DimensionMismatch) {
  EXPECT_THROW(observability_rank(diagonal_selector(2), liouvillian(HermitianMatrix::zero(3))),
               std::invalid_argument);
}

TEST(Batch, IdentityAndPhysicalAreInvertible) {
  for (std::size_t d = 1; d <= 4; ++d) {
    const InitialStateBatch id = identity_batch(d);
    const auto n = static_cast<Eigen::Index>(d * d);
    EXPECT_EQ(id.lambda0, ComplexMatrix::Identity(n, n));
    EXPECT_NO_THROW(check_invertible(id));
    const InitialStateBatch ph = physical_batch(d);
    EXPECT_EQ(ph.labels.size(), d * d);
    EXPECT_NO_THROW(check_invertible(ph));
    for (Eigen::Index l = 0; l < n; ++l) {
      const ComplexMatrix rho = unvec(ph.lambda0.col(l), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
      EXPECT_NO_THROW(DensityOperator{rho});
    }
  }
  InitialStateBatch singular = identity_batch(2);
  singular.lambda0.col(3) = singular.lambda0.col(0);
  EXPECT_THROW(check_invertible(singular), std::invalid_argument);
}

TEST(Stacks, ExactExamples) {
  const OutputSelector c = diagonal_selector(2);
  const ComplexMatrix lambda0 = identity_batch(2).lambda0;
  const DerivativeStacks s0 = exact_derivative_stacks(c, liouvillian(observable_pair_h()), lambda0, 0);
  ASSERT_EQ(s0.y.size(), 1u);
  EXPECT_EQ(s0.y[0], ComplexMatrix(c.c.cast<Complex>() * lambda0));
  const DerivativeStacks z = exact_derivative_stacks(c, liouvillian(HermitianMatrix::zero(2)), lambda0, 3);
  for (std::size_t k = 1; k <= 3; ++k) EXPECT_EQ(z.y[k], ComplexMatrix::Zero(2, 4));
}

TEST(Stacks, FiniteDifferencesMatchExactAtLowOrder) {
  std::mt19937_64 gen(2);
  const HermitianMatrix h = random_hermitian(2, gen);
  const OutputSelector c = diagonal_selector(2);
  const ComplexMatrix lambda0 = physical_batch(2).lambda0;
  const DerivativeStacks exact = exact_derivative_stacks(c, liouvillian(h), lambda0, 2);
  const SampledOutputs out = sample_outputs(h, c, lambda0, 1e-3, 8);
  const DerivativeStacks est = estimate_derivative_stacks(out, 2, 1e-3);
  for (std::size_t k = 0; k <= 2; ++k) {
    EXPECT_LE((est.y[k] - exact.y[k]).cwiseAbs().maxCoeff(), 1e-4) << "order " << k;
  }
  EXPECT_TRUE(est.warnings.empty());
}

TEST(Stacks, ConstantOutputsHaveZeroDerivatives) {
  const OutputSelector c = diagonal_selector(2);
  const SampledOutputs out = sample_outputs(HermitianMatrix::zero(2), c, physical_batch(2).lambda0, 0.01, 12);
  const DerivativeStacks est = estimate_derivative_stacks(out, 3, 0.01);
  for (std::size_t k = 1; k <= 3; ++k) EXPECT_LE(est.y[k].cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Stacks, HighOrderIsIllConditionedAndWarned) {
  const HermitianMatrix h = observable_pair_h();
  const OutputSelector c = diagonal_selector(2);
  const ComplexMatrix lambda0 = physical_batch(2).lambda0;
  const SampledOutputs out = sample_outputs(h, c, lambda0, 0.01, 16);
  const DerivativeStacks est = estimate_derivative_stacks(out, 4, 0.01);
  EXPECT_FALSE(est.warnings.empty());
  const DerivativeStacks exact = exact_derivative_stacks(c, liouvillian(h), lambda0, 4);
  const double rel = spectral_norm(est.y[4] - exact.y[4]) / spectral_norm(exact.y[4]);
  EXPECT_GT(rel, 1e-10);
  EXPECT_EQ(est.error_estimate.size(), 5u);
}

TEST(Stacks, EstimatorValidation) {
  const SampledOutputs out = sample_outputs(observable_pair_h(), diagonal_selector(2), physical_batch(2).lambda0, 0.01, 3);
  EXPECT_THROW(estimate_derivative_stacks(out, 4, 0.01), std::invalid_argument);  // insufficient
  EXPECT_THROW(estimate_derivative_stacks(out, 1, 0.015), std::invalid_argument);  // not a multiple
  EXPECT_NO_THROW(estimate_derivative_stacks(out, 2, 0.01));
}

TEST(Reconstruct, ObservableRoundTrip) {
  const HermitianMatrix h = observable_pair_h();
  const Liouvillian l = liouvillian(h);
  const ComplexMatrix lambda0 = identity_batch(2).lambda0;
  const LiouvillianReconstruction rec =
      reconstruct_liouvillian(exact_derivative_stacks(diagonal_selector(2), l, lambda0, 4), lambda0);
  ASSERT_TRUE(rec.ok());
  EXPECT_EQ(rec.rank, 4u);
  EXPECT_LE(spectral_norm(rec.l->matrix() - l.matrix()), 1e-9);
  const HamiltonianExtraction ext = extract_hamiltonian(*rec.l);
  EXPECT_LE(spectral_norm(ext.h.matrix() - h.matrix()), 1e-9);  // h is already traceless
}

TEST(Reconstruct, PhysicalBatchRoundTrip) {
  std::mt19937_64 gen(3);
  const HermitianMatrix h = random_hermitian(3, gen);
  const Liouvillian l = liouvillian(h, 0.5);
  const ComplexMatrix lambda0 = physical_batch(3).lambda0;
  const LiouvillianReconstruction rec =
      reconstruct_liouvillian(exact_derivative_stacks(diagonal_selector(3), l, lambda0, 9), lambda0, kDefaultRankRtol, 0.5);
  ASSERT_TRUE(rec.ok()) << rec.failure;
  EXPECT_LE(spectral_norm(rec.l->matrix() - l.matrix()), 1e-8);
  EXPECT_LE(spectral_norm(extract_hamiltonian(*rec.l, 0.5).h.matrix() - traceless(h).matrix()), 1e-8);
}

TEST(Reconstruct, ZeroGeneratorAndUnobservable) {
  const ComplexMatrix lambda0 = identity_batch(2).lambda0;
  const LiouvillianReconstruction zero = reconstruct_liouvillian(
      exact_derivative_stacks(diagonal_selector(2), liouvillian(HermitianMatrix::zero(2)), lambda0, 4), lambda0);
  // The pair (C, 0) is not observable, so L = 0 cannot be certified unique.
  EXPECT_FALSE(zero.ok());
  const LiouvillianReconstruction sx = reconstruct_liouvillian(
      exact_derivative_stacks(diagonal_selector(2), liouvillian(HermitianMatrix(sigma_x())), lambda0, 4), lambda0);
  EXPECT_FALSE(sx.ok());
  EXPECT_EQ(sx.rank, 3u);
  EXPECT_NE(sx.failure.find("not observable"), std::string::npos);
}

TEST(Reconstruct, RejectsShortStacks) {
  const ComplexMatrix lambda0 = identity_batch(2).lambda0;
  EXPECT_THROW(reconstruct_liouvillian(
                   exact_derivative_stacks(diagonal_selector(2), liouvillian(observable_pair_h()), lambda0, 2), lambda0),
               std::invalid_argument);
}

TEST(Extract, GaugeAndErrors) {
  std::mt19937_64 gen(4);
  const HermitianMatrix h = traceless(random_hermitian(3, gen));
  EXPECT_LE(spectral_norm(extract_hamiltonian(liouvillian(h)).h.matrix() - h.matrix()), 1e-9);
  const HermitianMatrix shifted(ComplexMatrix(h.matrix() + 3.0 * ComplexMatrix::Identity(3, 3)));
  EXPECT_LE(spectral_norm(extract_hamiltonian(liouvillian(shifted)).h.matrix() - h.matrix()), 1e-9);
  // Random skew-Hermitian 9x9 matrices are not of commutator form.
  const ComplexMatrix g = qtopo::test::random_complex(9, 9, gen);
  EXPECT_THROW(extract_hamiltonian(Liouvillian(ComplexMatrix(g - g.adjoint()))), std::domain_error);
}

TEST(Decomposition, ReproducesKetBra) {
  for (std::size_t d = 2; d <= 4; ++d) {
    for (std::size_t k = 1; k <= d; ++k) {
      for (std::size_t j = 1; j <= d; ++j) {
        const auto terms = physical_decomposition(d, k, j);
        EXPECT_EQ(terms.size(), k == j ? 1u : 4u);
        ComplexMatrix sum = ComplexMatrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        for (const auto& t : terms) {
          sum += t.coefficient * t.state.matrix();
          EXPECT_NEAR(t.state.matrix().trace().real(), 1.0, 1e-15);
        }
        EXPECT_LE((sum - ket_bra(d, k, j)).cwiseAbs().maxCoeff(), 1e-14);
      }
    }
  }
  EXPECT_THROW(physical_decomposition(2, 0, 1), std::invalid_argument);
  EXPECT_THROW(physical_decomposition(2, 1, 3), std::invalid_argument);
}

TEST(Decomposition, LinearRecombinationMatchesPropagation) {
  std::mt19937_64 gen(5);
  const HermitianMatrix h = random_hermitian(3, gen);
  const Propagator prop(h);
  const auto terms = physical_decomposition(3, 1, 3);
  ComplexMatrix sum = ComplexMatrix::Zero(3, 3);
  for (const auto& t : terms) sum += t.coefficient * propagate(h, t.state, 0.8).matrix();
  EXPECT_LE((sum - prop.evolve(ket_bra(3, 1, 3), 0.8)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Decomposition, PhysicalOutputsRecombineToIdentityBatch) {
  std::mt19937_64 gen(6);
  const HermitianMatrix h = random_hermitian(3, gen);
  const OutputSelector c = diagonal_selector(3);
  const Liouvillian l = liouvillian(h);
  const DerivativeStacks phys = exact_derivative_stacks(c, l, physical_batch(3).lambda0, 2);
  const DerivativeStacks ident = exact_derivative_stacks(c, l, identity_batch(3).lambda0, 2);
  for (std::size_t k = 0; k <= 2; ++k) {
    EXPECT_LE((physical_to_identity_outputs(3, phys.y[k]) - ident.y[k]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(OutputBatch, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "qtopo_output_batch_test";
  std::filesystem::remove_all(dir);
  const InitialStateBatch batch = physical_batch(2);
  const SampledOutputs out = sample_outputs(observable_pair_h(), diagonal_selector(2), batch.lambda0, 0.01, 3);
  write_output_batch(dir, out, batch);
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "output_001.csv"));
  const auto [back, bbatch] = read_output_batch(dir);
  std::filesystem::remove_all(dir);
  EXPECT_EQ(back.half_width, 3u);
  EXPECT_DOUBLE_EQ(back.h, 0.01);
  ASSERT_EQ(back.values.size(), out.values.size());
  for (std::size_t m = 0; m < out.values.size(); ++m) {
    EXPECT_EQ(ComplexMatrix(back.values[m]), ComplexMatrix(out.values[m].real().cast<Complex>()));
  }
  EXPECT_LE((bbatch.lambda0 - batch.lambda0).norm(), 1e-15);
}

TEST(OutputBatch, RejectsComplexOutputs) {
  const InitialStateBatch batch = identity_batch(2);
  const SampledOutputs out = sample_outputs(observable_pair_h(), diagonal_selector(2), batch.lambda0, 0.01, 1);
  EXPECT_THROW(write_output_batch(std::filesystem::temp_directory_path() / "qtopo_never", out, batch),
               std::invalid_argument);
}
