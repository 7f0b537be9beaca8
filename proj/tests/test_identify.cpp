#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/QR>

#include "qtopo/identify.hpp"
#include "qtopo/netmodel.hpp"
#include "test_support.hpp"

using namespace qtopo;
using qtopo::test::diag2;
using qtopo::test::random_density;
using qtopo::test::random_hermitian;
using qtopo::test::sigma_x;

namespace {

// Brute-force system built from commutators of explicit basis matrices,
// independent of the Kronecker formulation: column p holds
// [Re vec([B_p, P]); Im vec([B_p, P])].
RealMatrix brute_force_system(const HermitianMatrix& p, AdmissibleClass cls) {
  const auto d = static_cast<Eigen::Index>(p.dim());
  std::vector<ComplexMatrix> basis;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      ComplexMatrix re = ComplexMatrix::Zero(d, d);
      re(i, j) = re(j, i) = 1.0;
      basis.push_back(re);
      if (cls == AdmissibleClass::hermitian) {
        ComplexMatrix im = ComplexMatrix::Zero(d, d);
        im(i, j) = Complex(0, 1);
        im(j, i) = Complex(0, -1);
        basis.push_back(im);
      }
    }
  }
  RealMatrix a(2 * d * d, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t c = 0; c < basis.size(); ++c) {
    const ComplexMatrix m = basis[c] * p.matrix() - p.matrix() * basis[c];
    for (Eigen::Index k = 0; k < d * d; ++k) {
      a(k, static_cast<Eigen::Index>(c)) = m(k % d, k / d).real();
      a(d * d + k, static_cast<Eigen::Index>(c)) = m(k % d, k / d).imag();
    }
  }
  return a;
}

std::size_t qr_rank(const RealMatrix& a) {
  Eigen::ColPivHouseholderQR<RealMatrix> qr(a);
  qr.setThreshold(1e-9);
  return static_cast<std::size_t>(qr.rank());
}

// Rank test as printed: the complex stack [P~; F1; F2] with F1 selecting the
// diagonal of vec(M) and F2 enforcing M = M^T, full rank d^2 <=> unique.
std::size_t literal_rank(const HermitianMatrix& p) {
  const auto d = static_cast<Eigen::Index>(p.dim());
  const ComplexMatrix pt = commutator_operator(p);
  const Eigen::Index n_pairs = d * (d - 1) / 2;
  ComplexMatrix stack = ComplexMatrix::Zero(pt.rows() + d + n_pairs, d * d);
  stack.topRows(pt.rows()) = pt;
  for (Eigen::Index k = 0; k < d; ++k) stack(pt.rows() + k, k * (d + 1)) = 1.0;
  Eigen::Index row = pt.rows() + d;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j, ++row) {
      stack(row, j * d + i) = 1.0;
      stack(row, i * d + j) = -1.0;
    }
  }
  return svd_rank_pinv(stack).svd.rank;
}

HermitianMatrix random_real_symmetric(std::size_t d, std::mt19937_64& gen) {
  const ComplexMatrix h = random_hermitian(d, gen).matrix();
  return HermitianMatrix(ComplexMatrix(h.real().cast<Complex>()));
}

AdmissibleMatrix random_admissible(std::size_t d, std::mt19937_64& gen) {
  ComplexMatrix m = random_hermitian(d, gen).matrix();
  m.diagonal().setZero();
  return AdmissibleMatrix(m);
}

}  // namespace

TEST(Trapezoid, ConstantTrajectoryIsExact) {
  std::mt19937_64 gen(1);
  const DensityOperator rho = random_density(3, gen);
  const Trajectory t = sample_trajectory(HermitianMatrix::zero(3), rho, 2.0, 0.1);
  for (std::size_t sub : {1u, 2u, 4u, 5u, 10u, 20u}) {
    EXPECT_LE((build_p_trapezoid(t, sub).matrix() - 2.0 * rho.matrix()).norm(), 1e-14);
  }
}

TEST(Trapezoid, SinglePanel) {
  std::mt19937_64 gen(2);
  const Trajectory t = sample_trajectory(random_hermitian(2, gen), random_density(2, gen), 1.0, 0.25);
  const ComplexMatrix expect = 0.5 * (t.front().matrix() + t.back().matrix());
  EXPECT_LE((build_p_trapezoid(t, 4).matrix() - expect).norm(), 1e-15);
  EXPECT_THROW(build_p_trapezoid(t, 3), std::invalid_argument);
  EXPECT_THROW(build_p_trapezoid(t, 0), std::invalid_argument);
}

TEST(BuildQ, Examples) {
  const DensityOperator rho(diag2(1, 0));
  EXPECT_EQ(build_q(rho, rho), ComplexMatrix::Zero(2, 2));
  const DensityOperator flipped = propagate(HermitianMatrix(sigma_x()), rho, std::numbers::pi / 2);
  const ComplexMatrix q = build_q(rho, flipped);
  EXPECT_LE((q - Complex(0, 1) * diag2(-1, 1)).cwiseAbs().maxCoeff(), 1e-14);
  const HermitianMatrix p = exact_gram(HermitianMatrix(sigma_x()), rho, 1.0);
  EXPECT_EQ(build_q(rho, flipped, 1.0, HermitianMatrix::zero(2), p), q);
  EXPECT_THROW(build_q(rho, flipped, 1.0, HermitianMatrix::zero(2)), std::invalid_argument);
}

TEST(BuildQ, KnownNodeHamiltonianRecoversInteraction) {
  // H = H0 + M: subtracting [H0, P] leaves [M, P] = Q'.
  std::mt19937_64 gen(3);
  const std::size_t d = 3;
  const AdmissibleMatrix m = random_admissible(d, gen);
  ComplexMatrix h0 = ComplexMatrix::Zero(3, 3);
  h0.diagonal() << 0.4, -1.1, 0.9;
  const HermitianMatrix h(ComplexMatrix(h0 + m.matrix()));
  const DensityOperator rho = random_density(d, gen);
  const HermitianMatrix p = exact_gram(h, rho, 2.0);
  const ComplexMatrix q = build_q(rho, propagate(h, rho, 2.0), 1.0, HermitianMatrix(h0), p);
  const IdentificationReport r = solve_commutator(p, q);
  EXPECT_EQ(r.outcome, Outcome::unique);
  EXPECT_LE(relative_error(r.estimate, m), 1e-8);
}

TEST(Embedding, Parametrization) {
  const AdmissibleEmbedding e(2);
  EXPECT_EQ(e.parameter_count(), 2u);
  RealVector theta(2);
  theta << 1, 0;
  EXPECT_EQ(e.matrix(theta).matrix(), sigma_x());
  std::mt19937_64 gen(4);
  for (std::size_t d = 2; d <= 6; ++d) {
    for (auto cls : {AdmissibleClass::hermitian, AdmissibleClass::real_symmetric}) {
      const AdmissibleEmbedding emb(d, cls);
      EXPECT_EQ(emb.parameter_count(), emb.parameters_per_pair() * d * (d - 1) / 2);
      const RealVector t = RealVector::Random(static_cast<Eigen::Index>(emb.parameter_count()));
      const AdmissibleMatrix m = emb.matrix(t);
      EXPECT_EQ(emb.parameters(m), t);
      EXPECT_EQ(m.matrix(), m.matrix().adjoint());
      EXPECT_EQ(m.matrix().diagonal(), ComplexVector::Zero(static_cast<Eigen::Index>(d)));
      EXPECT_LE((emb.map() * t.cast<Complex>() - vec(m.matrix())).norm(), 1e-14);
      // S injective.
      EXPECT_EQ(svd_rank_pinv(emb.map()).svd.rank, emb.parameter_count());
    }
  }
  EXPECT_THROW(AdmissibleEmbedding(1), std::invalid_argument);
}

TEST(Embedding, CommutatorOperatorMatchesDefinition) {
  std::mt19937_64 gen(5);
  const HermitianMatrix p = random_hermitian(4, gen);
  const ComplexMatrix m = random_admissible(4, gen).matrix();
  EXPECT_LE((commutator_operator(p) * vec(m) - vec(commutator(m, p.matrix()))).norm(), 1e-12);
}

TEST(Embedding, ConstrainedSystemMatchesBruteForce) {
  std::mt19937_64 gen(6);
  for (std::size_t d = 2; d <= 5; ++d) {
    const HermitianMatrix p = random_hermitian(d, gen);
    for (auto cls : {AdmissibleClass::hermitian, AdmissibleClass::real_symmetric}) {
      EXPECT_LE((constrained_system(p, cls) - brute_force_system(p, cls)).norm(), 1e-13);
    }
  }
}

TEST(Commutant, Examples) {
  EXPECT_EQ(commutant_dimension(HermitianMatrix::identity(3)), 6u);
  EXPECT_EQ(commutant_dimension(HermitianMatrix(diag2(1, 0))), 0u);
  ComplexMatrix distinct = ComplexMatrix::Zero(4, 4);
  distinct.diagonal() << 0.1, 0.7, -2.0, 3.5;
  EXPECT_EQ(commutant_dimension(HermitianMatrix(distinct)), 0u);
  // Repeated diagonal entries leave the block between them free.
  ComplexMatrix repeated = distinct;
  repeated(1, 1) = 0.1;
  EXPECT_EQ(commutant_dimension(HermitianMatrix(repeated)), 2u);
  EXPECT_EQ(commutant_dimension(HermitianMatrix(repeated), kDefaultRankRtol,
                                AdmissibleClass::real_symmetric),
            1u);
}

TEST(Commutant, AgreesWithIndependentRank) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t d = 2 + static_cast<std::size_t>(trial % 4);
    HermitianMatrix p = random_hermitian(d, gen);
    if (trial % 3 == 1) p = HermitianMatrix::identity(d);
    if (trial % 3 == 2) {
      ComplexMatrix m = ComplexMatrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
      for (std::size_t k = 0; k < d; ++k) m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = static_cast<double>(k % 2);
      p = HermitianMatrix(m);
    }
    for (auto cls : {AdmissibleClass::hermitian, AdmissibleClass::real_symmetric}) {
      const std::size_t n = AdmissibleEmbedding(d, cls).parameter_count();
      EXPECT_EQ(commutant_dimension(p, kDefaultRankRtol, cls), n - qr_rank(brute_force_system(p, cls)));
    }
  }
}

TEST(Solve, IdentityIsNonUnique) {
  const IdentificationReport r = solve_commutator(HermitianMatrix::identity(3), ComplexMatrix::Zero(3, 3));
  EXPECT_EQ(r.outcome, Outcome::non_unique);
  EXPECT_EQ(r.solvability(), 0);
  EXPECT_FALSE(r.trusted());
  EXPECT_EQ(r.rank, 0u);
  EXPECT_EQ(r.required_rank, 6u);
}

TEST(Solve, ExactPauliXRoundTrip) {
  const HermitianMatrix h(sigma_x());
  const DensityOperator rho(diag2(1, 0));
  const HermitianMatrix p = exact_gram(h, rho, 1.0);
  const IdentificationReport r = solve_commutator(p, build_q(rho, propagate(h, rho, 1.0)));
  EXPECT_EQ(r.outcome, Outcome::unique);
  EXPECT_EQ(r.solvability(), 1);
  EXPECT_LE(relative_error(r.estimate, AdmissibleMatrix(sigma_x())), 1e-8);
  EXPECT_LE(r.residual, 1e-10);
  EXPECT_FALSE(r.commutes_with_p);
}

TEST(Solve, MaximallyMixedIsNonUnique) {
  std::mt19937_64 gen(8);
  for (std::size_t d = 2; d <= 5; ++d) {
    const HermitianMatrix h = random_hermitian(d, gen);
    const auto n = static_cast<Eigen::Index>(d);
    const DensityOperator rho(ComplexMatrix(ComplexMatrix::Identity(n, n) / static_cast<double>(d)));
    IdentifyOptions opts;
    const IdentificationReport r = identify_topology(sample_trajectory(h, rho, 1.0, 0.01), opts);
    EXPECT_EQ(r.outcome, Outcome::non_unique);
  }
}

TEST(Solve, ZeroQWithFullRankGivesZero) {
  const IdentificationReport r =
      solve_commutator(HermitianMatrix(diag2(1, 0)), ComplexMatrix::Zero(2, 2));
  EXPECT_EQ(r.outcome, Outcome::unique);
  EXPECT_EQ(r.estimate.matrix(), ComplexMatrix::Zero(2, 2));
}

TEST(Solve, InconsistentData) {
  // [M, diag(1, 0)] has zero diagonal, so a Q with a diagonal cannot be matched.
  const IdentificationReport r = solve_commutator(HermitianMatrix(diag2(1, 0)), Complex(0, 1) * diag2(1, -1));
  EXPECT_EQ(r.outcome, Outcome::inconsistent);
  EXPECT_EQ(r.solvability(), 0);
  EXPECT_GT(r.residual, 0.5);
}

TEST(Solve, InputValidation) {
  EXPECT_THROW(solve_commutator(HermitianMatrix::identity(2), ComplexMatrix::Zero(3, 3)),
               std::invalid_argument);
  SolveOptions bad;
  bad.rank_rtol = 0.0;
  EXPECT_THROW(solve_commutator(HermitianMatrix::identity(2), ComplexMatrix::Zero(2, 2), bad),
               std::invalid_argument);
  ComplexMatrix nan = ComplexMatrix::Zero(2, 2);
  nan(0, 1) = std::nan("");
  EXPECT_THROW(solve_commutator(HermitianMatrix::identity(2), nan), std::invalid_argument);
}

TEST(Solve, UniqueEstimateIsExactlyAdmissible) {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 3 + static_cast<std::size_t>(trial % 3);
    const AdmissibleMatrix m = random_admissible(d, gen);
    const HermitianMatrix p = random_hermitian(d, gen);
    const IdentificationReport r = solve_commutator(p, commutator(m.matrix(), p.matrix()));
    ASSERT_EQ(r.outcome, Outcome::unique);
    const ComplexMatrix& e = r.estimate.matrix();
    EXPECT_EQ(e, e.adjoint());
    for (Eigen::Index i = 0; i < e.rows(); ++i) EXPECT_EQ(e(i, i), Complex(0, 0));
    EXPECT_LE(r.residual, 1e-10);
    EXPECT_LE(relative_error(r.estimate, m), 1e-9);
  }
}

TEST(Solve, UniquenessEquivalence) {
  std::mt19937_64 gen(10);
  int non_unique = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 2 + static_cast<std::size_t>(trial % 5);
    HermitianMatrix p = random_hermitian(d, gen);
    switch (trial % 4) {
      case 1:
        p = HermitianMatrix::identity(d);
        break;
      case 2: {
        // Basis-state Gram matrix with repeated zero diagonal entries.
        p = HermitianMatrix(ComplexMatrix(2.0 * basis_density(d, 1).matrix()));
        break;
      }
      default:
        break;
    }
    const ComplexMatrix q = commutator(random_admissible(d, gen).matrix(), p.matrix());
    const IdentificationReport r = solve_commutator(p, q);
    const bool nu = r.outcome == Outcome::non_unique;
    non_unique += nu;
    EXPECT_EQ(nu, commutant_dimension(p) > 0) << "trial " << trial;
  }
  EXPECT_GT(non_unique, 0);
}

TEST(Solve, MatchesNormalEquations) {
  std::mt19937_64 gen(11);
  for (std::size_t d : {2u, 3u}) {
    for (int trial = 0; trial < 10; ++trial) {
      const HermitianMatrix p = random_hermitian(d, gen);
      // Noisy Q so that the least-squares solution is non-trivial.
      ComplexMatrix q = commutator(random_admissible(d, gen).matrix(), p.matrix());
      const ComplexMatrix noise = 1e-3 * qtopo::test::random_complex(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d), gen);
      q += noise - noise.adjoint();
      SolveOptions opts;
      opts.residual_tol = 1.0;
      const IdentificationReport r = solve_commutator(p, q, opts);
      ASSERT_EQ(r.outcome, Outcome::unique);
      const RealMatrix a = brute_force_system(p, AdmissibleClass::hermitian);
      const ComplexVector qv = vec(q);
      RealVector b(2 * qv.size());
      b << qv.real(), qv.imag();
      const RealVector theta = (a.transpose() * a).ldlt().solve(a.transpose() * b);
      EXPECT_LE((AdmissibleEmbedding(d).parameters(r.estimate) - theta).norm(), 1e-8);
    }
  }
}

TEST(Solve, PrintedRankTestAgreesOnRealSymmetricData) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 2 + static_cast<std::size_t>(trial % 5);
    HermitianMatrix p = random_real_symmetric(d, gen);
    if (trial % 5 == 3) p = HermitianMatrix::identity(d);
    if (trial % 5 == 4) p = HermitianMatrix(ComplexMatrix(basis_density(d, 2).matrix()));
    const bool literal_unique = literal_rank(p) == d * d;
    EXPECT_EQ(literal_unique, commutant_dimension(p) == 0) << "trial " << trial;
    EXPECT_EQ(literal_unique,
              commutant_dimension(p, kDefaultRankRtol, AdmissibleClass::real_symmetric) == 0)
        << "trial " << trial;
  }
}

TEST(RelativeError, Examples) {
  const AdmissibleMatrix a(sigma_x());
  EXPECT_EQ(relative_error(a, a), 0.0);
  EXPECT_EQ(relative_error(AdmissibleMatrix::zero(2), a), 1.0);
  EXPECT_EQ(relative_error(AdmissibleMatrix(ComplexMatrix(2.0 * sigma_x())), a), 1.0);
  EXPECT_THROW(relative_error(a, AdmissibleMatrix::zero(2)), ZeroReferenceError);
}

TEST(IdentifyTopology, PauliXWithTrapezoid) {
  const Trajectory t = sample_trajectory(HermitianMatrix(sigma_x()), DensityOperator(diag2(1, 0)), 1.0, 0.01);
  IdentifyOptions opts;
  opts.truth = AdmissibleMatrix(sigma_x());
  const IdentificationReport r = identify_topology(t, opts);
  EXPECT_EQ(r.solvability(), 1);
  ASSERT_TRUE(r.epsilon.has_value());
  EXPECT_LE(*r.epsilon, 1e-3);
}

TEST(IdentifyTopology, ZeroHamiltonian) {
  const Trajectory t = sample_trajectory(HermitianMatrix::zero(2), DensityOperator(diag2(1, 0)), 1.0, 0.01);
  IdentifyOptions opts;
  opts.truth = AdmissibleMatrix::zero(2);
  const IdentificationReport r = identify_topology(t, opts);
  EXPECT_EQ(r.outcome, Outcome::unique);
  EXPECT_EQ(r.estimate.matrix(), ComplexMatrix::Zero(2, 2));
  EXPECT_FALSE(r.epsilon.has_value());
  EXPECT_FALSE(r.warnings.empty());
}

TEST(IdentifyTopology, CoarserGridNeverHelpsInMedian) {
  std::vector<double> fine, coarse;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SeededRng rng(seed, 99);
    const AdjacencyMatrix a = erdos_renyi(4, 0.5, rng);
    if (a.edge_count() == 0) continue;
    const Trajectory t = sample_trajectory(a.hamiltonian(), basis_density(4, 1 + rng.index(4)), 2.0, 0.01);
    IdentifyOptions opts;
    opts.truth = a.admissible();
    opts.solve.residual_tol = 1.0;
    const IdentificationReport rf = identify_topology(t, opts);
    opts.subsample = 20;
    const IdentificationReport rc = identify_topology(t, opts);
    if (!rf.trusted() || !rc.trusted()) continue;
    fine.push_back(*rf.epsilon);
    coarse.push_back(*rc.epsilon);
  }
  ASSERT_GE(fine.size(), 5u);
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  EXPECT_LE(median(fine), median(coarse) + 1e-12);
}

TEST(Report, JsonFields) {
  const IdentificationReport r = solve_commutator(HermitianMatrix(diag2(1, 0)), ComplexMatrix::Zero(2, 2));
  const nlohmann::json j = report_to_json(r, {{"seed", 17}});
  for (const char* key : {"outcome", "rank", "required_rank", "residual", "solvability", "epsilon",
                          "sigma_min_retained", "sigma_max_discarded", "seed", "parameters", "estimate"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["seed"], 17);
  EXPECT_EQ(j["outcome"], "unique");
  EXPECT_TRUE(j["epsilon"].is_null());
}

TEST(AdmissibleClassNames, RoundTrip) {
  for (auto c : {AdmissibleClass::hermitian, AdmissibleClass::real_symmetric}) {
    EXPECT_EQ(admissible_class_from_string(to_string(c)), c);
  }
  EXPECT_THROW(admissible_class_from_string("complex"), std::invalid_argument);
}
