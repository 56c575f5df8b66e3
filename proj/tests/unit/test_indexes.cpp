#include "xsim/indexes.hpp"
#include "xsim/synth.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace xsim;
using synth::random_matrix;

namespace {

CenteredMatrix centered(const Matrix& a) { return center_columns(ActivationMatrix(a)); }

CenteredMatrix centered_random(std::uint64_t seed, Eigen::Index m, Eigen::Index n) {
  return center_columns(random_matrix(seed, m, n));
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an xsim::Error";
  return ErrorCode::IoError;
}

}  // namespace

// ---------------------------------------------------------------- gram spectrum

TEST(GramSpectrum, RankOneColumn) {
  Matrix a(3, 1);
  a << -1, 0, 1;
  const auto s = gram_spectrum(centered(a));
  EXPECT_NEAR(s.eigenvalues(0), 2.0, 1e-12);
  EXPECT_NEAR(s.eigenvalues.tail(2).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  EXPECT_EQ(s.rank(), 1);
  Vector expected(3);
  expected << -1, 0, 1;
  expected /= std::sqrt(2.0);
  EXPECT_NEAR(std::abs(s.eigenvectors.col(0).dot(expected)), 1.0, 1e-12);
}

TEST(GramSpectrum, OrthonormalColumnsGiveUnitEigenvalues) {
  // Two orthonormal centered columns in R^4.
  Matrix a(4, 2);
  a << 1, 1, -1, 1, 1, -1, -1, -1;
  a /= 2.0;
  const auto s = gram_spectrum(centered(a));
  EXPECT_EQ(s.rank(), 2);
  EXPECT_NEAR(s.eigenvalues(0), 1.0, 1e-12);
  EXPECT_NEAR(s.eigenvalues(1), 1.0, 1e-12);
}

TEST(GramSpectrum, ReconstructsGramMatrix) {
  const auto x = centered_random(11, 6, 3);
  const auto s = gram_spectrum(x);
  const Matrix gram = x.data() * x.data().transpose();
  EXPECT_LT((s.reconstruct() - gram).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((s.eigenvectors.transpose() * s.eigenvectors - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE(s.rank(), 3);
  for (Eigen::Index i = 1; i < 6; ++i) EXPECT_GE(s.eigenvalues(i - 1), s.eigenvalues(i));
  EXPECT_GE(s.eigenvalues.minCoeff(), 0.0);
}

// ---------------------------------------------------------------- linear CKA

TEST(LinearCka, SelfSimilarityIsOne) {
  const auto x = centered_random(1, 40, 5);
  EXPECT_NEAR(linear_cka(x, x).score, 1.0, 1e-12);
  EXPECT_NEAR(linear_cka(x, x, CkaMethod::spectral).score, 1.0, 1e-10);
}

TEST(LinearCka, InvariantToScaleAndOrthogonalMaps) {
  const auto raw = random_matrix(2, 40, 5);
  const Matrix q = synth::orthogonal_matrix(9, 5);
  const auto x = center_columns(raw);
  for (double c : {-3.0, 0.01, 250.0}) {
    const auto y = centered(c * raw.data() * q);
    EXPECT_NEAR(linear_cka(x, y).score, 1.0, 1e-10) << "c=" << c;
  }
}

TEST(LinearCka, SpectralMatchesGramFixedSeed) {
  const auto x = centered_random(50, 50, 8);
  const auto y = centered_random(51, 50, 8);
  const double spectral = linear_cka(x, y, CkaMethod::spectral).score;
  const double gram = linear_cka(x, y, CkaMethod::gram).score;
  EXPECT_NEAR(spectral, gram, 1e-8);
  // Third route: normalized HSIC with an explicit centering matrix.
  EXPECT_NEAR(gram, oracle::hsic_cka(random_matrix(50, 50, 8).data(), random_matrix(51, 50, 8).data()), 1e-10);
}

TEST(LinearCka, SpectralMatchesGramAcrossShapes) {
  synth::Rng rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = static_cast<Eigen::Index>(3 + rng.below(60));
    const auto nx = static_cast<Eigen::Index>(1 + rng.below(80));  // includes n > m
    const auto ny = static_cast<Eigen::Index>(1 + rng.below(80));
    const auto x = centered_random(1000 + trial, m, nx);
    const auto y = centered_random(2000 + trial, m, ny);
    EXPECT_NEAR(linear_cka(x, y, CkaMethod::spectral).score, linear_cka(x, y, CkaMethod::gram).score, 1e-8)
        << "m=" << m << " nx=" << nx << " ny=" << ny;
  }
}

TEST(LinearCka, Symmetric) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto x = centered_random(s, 30, 4);
    const auto y = centered_random(s + 100, 30, 9);
    EXPECT_NEAR(linear_cka(x, y).score, linear_cka(y, x).score, 1e-10);
  }
}

TEST(LinearCka, AllZeroIsDegenerate) {
  const auto zero = centered(Matrix::Constant(5, 2, 3.0));
  const auto x = centered_random(3, 5, 2);
  EXPECT_EQ(code_of([&] { linear_cka(zero, x); }), ErrorCode::DegenerateInput);
  EXPECT_EQ(code_of([&] { linear_cka(x, zero); }), ErrorCode::DegenerateInput);
}

TEST(LinearCka, PermutationInsensitiveWhileAncCollapses) {
  const auto raw = random_matrix(77, 1000, 100);
  const auto x = center_columns(raw);
  const auto xp = center_columns(synth::apply_transform(raw, synth::Permutation{5}));
  EXPECT_NEAR(linear_cka(x, xp).score, 1.0, 1e-8);
  // Independent Gaussian pairs: E|r| ~ sqrt(2 / (pi m)) ~ 0.025.
  EXPECT_LT(anc(x, xp).score, 0.2);
}

// ---------------------------------------------------------------- CCA family

TEST(Cca, IdenticalSubspacesScoreOne) {
  const auto x = centered_random(4, 60, 6);
  const auto r = cca(x, x);
  EXPECT_NEAR(r.score, 1.0, 1e-10);
  for (double rho : *r.components) EXPECT_NEAR(rho, 1.0, 1e-10);
}

TEST(Cca, InvariantUnderInvertibleMaps) {
  const auto raw = random_matrix(5, 80, 6);
  const auto x = center_columns(raw);
  const auto y = centered(raw.data() * synth::invertible_matrix(3, 6));
  EXPECT_NEAR(cca(x, y).score, 1.0, 1e-8);
}

TEST(Cca, MatchesGeneralizedEigenOracle) {
  const auto xr = random_matrix(100, 100, 5);
  const auto yr = random_matrix(200, 100, 5);
  const auto r = cca(center_columns(xr), center_columns(yr));
  const auto oracle = synth::cca_oracle(xr, yr);
  ASSERT_FALSE(oracle.regularized);
  EXPECT_NEAR(r.score, synth::cca_oracle_score(xr, yr), 1e-6);
  ASSERT_EQ(r.components->size(), oracle.decomposition.coefficients.size());
  for (std::size_t i = 0; i < r.components->size(); ++i) {
    EXPECT_NEAR((*r.components)[i], oracle.decomposition.coefficients[i], 1e-6);
  }
}

TEST(Cca, CoefficientsSortedInUnitInterval) {
  const auto r = cca(centered_random(8, 50, 7), centered_random(9, 50, 4));
  ASSERT_EQ(r.components->size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_GE((*r.components)[i], 0.0);
    EXPECT_LE((*r.components)[i], 1.0 + 1e-9);
    if (i > 0) EXPECT_GE((*r.components)[i - 1], (*r.components)[i]);
  }
}

TEST(Cca, SubspaceScoreIsRankRatio) {
  // Y spans a 3-dimensional subspace of X's 6-dimensional column space.
  const auto raw = random_matrix(21, 100, 6);
  const Matrix mix = random_matrix(22, 6, 3).data();
  const auto x = center_columns(raw);
  const auto y = centered(raw.data() * mix);
  EXPECT_NEAR(cca(x, y).score, 3.0 / 6.0, 1e-6);
  EXPECT_NEAR(cca(y, x).score, 1.0, 1e-6);
}

TEST(Cca, SymmetricForEqualRanks) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto x = centered_random(s, 70, 5);
    const auto y = centered_random(s + 50, 70, 5);
    EXPECT_NEAR(cca(x, y).score, cca(y, x).score, 1e-8);
    EXPECT_NEAR(svcca(x, y, 1.0).score, svcca(y, x, 1.0).score, 1e-8);
  }
}

TEST(Cca, RankZeroIsDegenerate) {
  const auto zero = centered(Matrix::Constant(10, 3, 1.0));
  const auto x = centered_random(1, 10, 3);
  EXPECT_EQ(code_of([&] { cca(zero, x); }), ErrorCode::DegenerateInput);
  EXPECT_EQ(code_of([&] { pwcca(x, zero); }), ErrorCode::DegenerateInput);
  EXPECT_EQ(code_of([&] { svcca(zero, x); }), ErrorCode::DegenerateInput);
}

TEST(Cca, FlagsSaturatedColumnSpace) {
  const auto wide_x = centered_random(1, 8, 12);
  const auto wide_y = centered_random(2, 8, 12);
  EXPECT_TRUE(cca(wide_x, wide_y).rank_deficient);
  EXPECT_FALSE(cca(centered_random(1, 100, 5), centered_random(2, 100, 5)).rank_deficient);
}

TEST(Cca, OrthogonalSubspacesScoreZero) {
  // Centered orthonormal columns, split between the two sides.
  Matrix q = centered_random(31, 50, 6).data();
  q = Eigen::HouseholderQR<Matrix>(q).householderQ() * Matrix::Identity(50, 6);
  const auto x = centered(q.leftCols(3) * random_matrix(32, 3, 3).data());
  const auto y = centered(q.rightCols(3) * random_matrix(33, 3, 3).data());
  const auto r = cca(x, y);
  EXPECT_NEAR(r.score, 0.0, 1e-10);
  for (double rho : *r.components) EXPECT_NEAR(rho, 0.0, 1e-8);
}

TEST(Svcca, ThresholdOneEqualsCca) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto x = centered_random(s, 60, 8);
    const auto y = centered_random(s + 1000, 60, 5);
    EXPECT_NEAR(svcca(x, y, 1.0).score, cca(x, y).score, 1e-8);
  }
}

TEST(Svcca, SelfIsOne) {
  const auto x = centered_random(6, 60, 8);
  EXPECT_NEAR(svcca(x, x, 0.99).score, 1.0, 1e-10);
}

TEST(Svcca, TruncationDropsNoiseDirection) {
  // X = [signal, 1e-4 * noise]; the noise column lies outside span(signal).
  const Matrix signal = random_matrix(41, 200, 3).data();
  Matrix with_noise(200, 4);
  with_noise << signal, 1e-4 * random_matrix(42, 200, 1).data();
  const auto x = centered(with_noise);
  const auto s = centered(signal);
  // Untruncated: three perfect canonical pairs out of rank 4.
  EXPECT_NEAR(cca(x, s).score, 0.75, 1e-10);
  // 99% of the variance lives in the signal directions.
  EXPECT_NEAR(svcca(x, s, 0.99).score, 1.0, 1e-10);
}

TEST(Svcca, RejectsBadThreshold) {
  const auto x = centered_random(6, 20, 3);
  EXPECT_EQ(code_of([&] { svcca(x, x, 0.0); }), ErrorCode::InvalidParam);
  EXPECT_EQ(code_of([&] { svcca(x, x, 1.5); }), ErrorCode::InvalidParam);
}

TEST(Pwcca, SelfAndInvertibleScoreOne) {
  const auto raw = random_matrix(7, 80, 5);
  const auto x = center_columns(raw);
  EXPECT_NEAR(pwcca(x, x).score, 1.0, 1e-10);
  EXPECT_NEAR(pwcca(x, centered(raw.data() * synth::invertible_matrix(8, 5))).score, 1.0, 1e-8);
}

TEST(Pwcca, MatchesIndependentReimplementation) {
  const auto xr = random_matrix(300, 100, 5);
  const auto yr = random_matrix(300, 100, 5, synth::Correlated{0.5, 1});
  const double ours = pwcca(center_columns(xr), center_columns(yr)).score;
  EXPECT_NEAR(ours, oracle::pwcca_from_oracle(xr, yr), 1e-8);
}

TEST(Pwcca, WeightsNormalized) {
  const auto d = canonical_decomposition(centered_random(1, 60, 6), centered_random(2, 60, 4));
  ASSERT_TRUE(d.weights.has_value());
  double total = 0;
  for (double w : *d.weights) {
    EXPECT_GE(w, 0.0);
    total += w;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(d.rank, 4);
}

TEST(Pwcca, Asymmetric) {
  const auto x = centered_random(400, 100, 6);
  const auto y = center_columns(random_matrix(400, 100, 6, synth::Correlated{0.4, 1}));
  // Weighting a different side reweights the same coefficients.
  EXPECT_GT(std::abs(pwcca(x, y).score - pwcca(y, x).score), 1e-6);
}

// ---------------------------------------------------------------- Pearson / ANC

TEST(Pearson, IdenticalVectors) {
  Vector v(4);
  v << -1.5, -0.5, 0.5, 1.5;
  EXPECT_DOUBLE_EQ(*pearson(v, v), 1.0);
  EXPECT_DOUBLE_EQ(*pearson(v, -v), -1.0);
}

TEST(Pearson, HandComputedValue) {
  // centered [1,2,3,4] vs centered [1,3,2,4]: dot 4, both norms sqrt(5).
  Vector a(4), b(4);
  a << -1.5, -0.5, 0.5, 1.5;
  b << -1.5, 0.5, -0.5, 1.5;
  EXPECT_NEAR(*pearson(a, b), 0.8, 1e-15);
  EXPECT_NEAR(*pearson(a, b), oracle::naive_pearson({1, 2, 3, 4}, {1, 3, 2, 4}), 1e-15);
}

TEST(Pearson, ZeroNormIsSentinel) {
  Vector a(3), z = Vector::Zero(3);
  a << -1, 0, 1;
  EXPECT_FALSE(pearson(a, z).has_value());
  EXPECT_FALSE(pearson(z, a).has_value());
}

TEST(Pearson, LengthMismatch) {
  EXPECT_EQ(code_of([] { pearson(Vector::Ones(3), Vector::Ones(4)); }), ErrorCode::ShapeMismatch);
}

TEST(Anc, SelfAndNegation) {
  const auto raw = random_matrix(3, 50, 10);
  const auto x = center_columns(raw);
  EXPECT_NEAR(anc(x, x).score, 1.0, 1e-12);
  EXPECT_NEAR(anc(x, centered(-raw.data())).score, 1.0, 1e-12);
}

TEST(Anc, HandComputedTwoNeurons) {
  Matrix x(4, 2), y(4, 2);
  x << 1, 1, 2, 2, 3, 3, 4, 4;
  y << 1, 4, 3, 3, 2, 2, 4, 1;
  const auto r = anc(centered(x), centered(y));
  ASSERT_EQ(r.components->size(), 2u);
  EXPECT_NEAR((*r.components)[0], 0.8, 1e-15);
  EXPECT_NEAR((*r.components)[1], 1.0, 1e-15);
  EXPECT_NEAR(r.score, 0.9, 1e-15);
  EXPECT_NEAR(r.score, oracle::naive_anc(x, y), 1e-15);
}

TEST(Anc, ScoreIsMeanOfComponents) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto x = centered_random(s, 30, 12);
    const auto y = center_columns(random_matrix(s, 30, 12, synth::Correlated{0.5, 1}));
    const auto r = anc(x, y);
    double mean = 0;
    for (double c : *r.components) mean += c;
    mean /= 12.0;
    EXPECT_NEAR(r.score, mean, 1e-12);
    EXPECT_NEAR(r.score, oracle::naive_anc(random_matrix(s, 30, 12).data(),
                                           random_matrix(s, 30, 12, synth::Correlated{0.5, 1}).data()),
                1e-12);
  }
}

TEST(Anc, DegeneratePolicies) {
  Matrix x(4, 3), y(4, 3);
  x << 1, 7, 1, 2, 7, 2, 3, 7, 3, 4, 7, 4;
  y << 1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4;
  const auto cx = centered(x), cy = centered(y);
  const auto zero = anc(cx, cy, DegeneratePolicy::zero);
  EXPECT_EQ(zero.degenerate_count, 1);
  EXPECT_TRUE(zero.degenerate[1]);
  EXPECT_NEAR(zero.score, 2.0 / 3.0, 1e-15);
  const auto skip = anc(cx, cy, DegeneratePolicy::skip);
  EXPECT_NEAR(skip.score, 1.0, 1e-15);
  EXPECT_EQ(skip.degenerate_count, 1);
}

TEST(Anc, AllDegenerateThrows) {
  const auto dead = centered(Matrix::Constant(4, 2, 1.0));
  EXPECT_EQ(code_of([&] { anc(dead, dead); }), ErrorCode::DegenerateInput);
}

TEST(Anc, NeuronCountMismatch) {
  EXPECT_EQ(code_of([] { anc(centered_random(1, 10, 3), centered_random(2, 10, 4)); }),
            ErrorCode::AlignmentUnavailable);
  EXPECT_EQ(code_of([] { anc(centered_random(1, 10, 3), centered_random(2, 11, 3)); }),
            ErrorCode::ShapeMismatch);
}

TEST(Anc, InvariantToPerNeuronAffineMaps) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto xr = random_matrix(s, 100, 15);
    const auto yr = random_matrix(s, 100, 15, synth::Correlated{0.7, 1});
    const double base = anc(center_columns(xr), center_columns(yr)).score;
    const auto xa = center_columns(synth::apply_transform(xr, synth::PerNeuronAffine{s + 10}));
    const auto ya = center_columns(synth::apply_transform(yr, synth::PerNeuronAffine{s + 20}));
    EXPECT_LT(std::abs(anc(xa, ya).score - base), 1e-10);
    EXPECT_LT(std::abs(anc(center_columns(xr), ya).score - base), 1e-10);
  }
}

// ---------------------------------------------------------------- fuzz

TEST(AllIndexes, ScoresStayInUnitInterval) {
  synth::Rng rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const auto m = static_cast<Eigen::Index>(3 + rng.below(40));
    const auto n = static_cast<Eigen::Index>(1 + rng.below(50));
    const auto x = centered_random(3000 + trial, m, n);
    const auto y = center_columns(random_matrix(3000 + trial, m, n, synth::Correlated{rng.uniform(-1, 1), 1}));
    for (auto kind : {IndexKind::anc, IndexKind::cka, IndexKind::cca, IndexKind::svcca, IndexKind::pwcca}) {
      const double s = compute_index(kind, x, y).score;
      EXPECT_GE(s, 0.0) << to_string(kind);
      EXPECT_LE(s, 1.0 + 1e-9) << to_string(kind) << " m=" << m << " n=" << n;
    }
  }
}
