#pragma once

// Synthetic activations, controlled transforms, and a reference CCA solver
// used to check the indexes against their invariance properties.
//
// Random streams: std::mt19937_64 seeded with splitmix64(seed ^ stream).
// Uniforms take the top 53 bits of one draw; normals use the Box-Muller
// transform, consuming two uniforms per pair of normals. None of this goes
// through std::*_distribution, so values are identical across standard
// library implementations.

#include "xsim/core.hpp"
#include "xsim/indexes.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <variant>
#include <vector>

namespace xsim::synth {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : engine_(splitmix64(seed ^ splitmix64(stream))) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % bound;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix out(rows, cols);
  // Row-major fill order so a matrix is a prefix-stable stream of rows.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = rng.normal();
  }
  return out;
}

struct Gaussian {};

/// Partner of `random_matrix(seed, m, n, Gaussian{})`: each neuron equals
/// rho * base + sqrt(1 - rho^2) * noise, so its expected correlation with
/// the matching base neuron is rho. Different `stream` values give
/// independent partners of the same base.
struct Correlated {
  double rho = 0.0;
  std::uint64_t stream = 1;
};

using Distribution = std::variant<Gaussian, Correlated>;

inline constexpr std::uint64_t kBaseStream = 0;

inline ActivationMatrix random_matrix(std::uint64_t seed, Eigen::Index m, Eigen::Index n,
                                      const Distribution& dist = Gaussian{}) {
  if (m < 2 || n < 1) {
    throw Error(ErrorCode::InvalidParam, "random_matrix needs m >= 2 and n >= 1");
  }
  Rng base_rng(seed, kBaseStream);
  Matrix base = gaussian_matrix(base_rng, m, n);
  if (std::holds_alternative<Gaussian>(dist)) return ActivationMatrix(std::move(base));

  const Correlated c = std::get<Correlated>(dist);
  if (!(c.rho >= -1.0 && c.rho <= 1.0)) {
    throw Error(ErrorCode::InvalidParam, "correlation must lie in [-1, 1]");
  }
  if (c.stream == kBaseStream) {
    throw Error(ErrorCode::InvalidParam, "stream 0 is reserved for the base matrix");
  }
  Rng noise_rng(seed, c.stream);
  const Matrix noise = gaussian_matrix(noise_rng, m, n);
  return ActivationMatrix(c.rho * base + std::sqrt(1.0 - c.rho * c.rho) * noise);
}

/// Haar-distributed orthogonal n x n matrix.
inline Matrix orthogonal_matrix(std::uint64_t seed, Eigen::Index n) {
  Rng rng(seed, 0x0A);
  const Matrix g = gaussian_matrix(rng, n, n);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

/// Q1 * diag(s) * Q2 with singular values s in [1, 1e3], so cond <= 1e3.
inline Matrix invertible_matrix(std::uint64_t seed, Eigen::Index n) {
  Rng rng(seed, 0x1B);
  Vector s(n);
  for (Eigen::Index i = 0; i < n; ++i) s(i) = std::pow(10.0, 3.0 * rng.uniform());
  s(0) = 1.0;
  if (n > 1) s(n - 1) = 1e3;
  return orthogonal_matrix(splitmix64(seed) ^ 0x51, n) * s.asDiagonal() *
         orthogonal_matrix(splitmix64(seed) ^ 0x52, n).transpose();
}

/// Uniformly random cyclic permutation (Sattolo). perm[j] is the source
/// column for output column j; for n >= 2 no index maps to itself.
inline std::vector<Eigen::Index> derangement(std::uint64_t seed, Eigen::Index n) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng rng(seed, 0x2C);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[j]);
  }
  return perm;
}

struct Orthogonal { std::uint64_t seed = 0; };
struct Invertible { std::uint64_t seed = 0; };
struct PerNeuronAffine { std::uint64_t seed = 0; };
struct Permutation { std::uint64_t seed = 0; };
struct IsotropicScale { double factor = 1.0; };

using Transform = std::variant<Orthogonal, Invertible, PerNeuronAffine, Permutation, IsotropicScale>;

inline Matrix permute_columns(const Matrix& a, const std::vector<Eigen::Index>& perm) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) out.col(j) = a.col(perm[static_cast<std::size_t>(j)]);
  return out;
}

inline ActivationMatrix apply_transform(const ActivationMatrix& x, const Transform& t) {
  const Matrix& a = x.data();
  const Eigen::Index n = x.n();
  if (const auto* o = std::get_if<Orthogonal>(&t)) {
    return ActivationMatrix(a * orthogonal_matrix(o->seed, n));
  }
  if (const auto* inv = std::get_if<Invertible>(&t)) {
    return ActivationMatrix(a * invertible_matrix(inv->seed, n));
  }
  if (const auto* aff = std::get_if<PerNeuronAffine>(&t)) {
    // z_i -> a_i z_i + b_i, |a_i| in [0.1, 10] with random sign, b_i in [-5, 5].
    Rng rng(aff->seed, 0x3D);
    Matrix out = a;
    for (Eigen::Index j = 0; j < n; ++j) {
      double scale = std::pow(10.0, rng.uniform(-1.0, 1.0));
      if (rng.uniform() < 0.5) scale = -scale;
      const double shift = rng.uniform(-5.0, 5.0);
      out.col(j) = (scale * out.col(j)).array() + shift;
    }
    return ActivationMatrix(std::move(out));
  }
  if (const auto* p = std::get_if<Permutation>(&t)) {
    return ActivationMatrix(permute_columns(a, derangement(p->seed, n)));
  }
  const double factor = std::get<IsotropicScale>(t).factor;
  if (factor == 0.0) throw Error(ErrorCode::InvalidParam, "isotropic scale factor must be nonzero");
  return ActivationMatrix(factor * a);
}

/// Canonical decomposition via the generalized symmetric eigenproblem
///   Sxy Syy^-1 Syx a = rho^2 Sxx a,
/// independent of the SVD route used by the indexes. Meant for small
/// instances only.
struct OracleDecomposition {
  CanonicalDecomposition decomposition;
  Matrix x_directions;  // n_x x k, column i solves the problem for coefficient i
  bool regularized = false;
};

inline OracleDecomposition cca_oracle(const ActivationMatrix& x_raw, const ActivationMatrix& y_raw) {
  detail::check_rows(x_raw.data(), y_raw.data());
  const Matrix x = center_columns(x_raw).data();
  const Matrix y = center_columns(y_raw).data();
  Matrix sxx = x.transpose() * x;
  Matrix syy = y.transpose() * y;
  const Matrix sxy = x.transpose() * y;

  OracleDecomposition out;
  auto regularize = [&out](Matrix& s) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
    const double top = std::max(eig.eigenvalues().maxCoeff(), 1e-300);
    if (eig.eigenvalues().minCoeff() <= 1e-12 * top) {
      s.diagonal().array() += 1e-10 * top;
      out.regularized = true;
    }
  };
  regularize(sxx);
  regularize(syy);

  const Matrix lhs = sxy * syy.ldlt().solve(sxy.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> solver(0.5 * (lhs + lhs.transpose()), sxx);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericalFailure, "generalized eigensolver did not converge");
  }
  const Eigen::Index k = std::min(x.cols(), y.cols());
  const Eigen::Index nx = x.cols();
  out.x_directions.resize(nx, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index src = nx - 1 - i;  // ascending order from the solver
    const double rho_sq = std::clamp(solver.eigenvalues()(src), 0.0, 1.0);
    out.decomposition.coefficients.push_back(std::sqrt(rho_sq));
    out.x_directions.col(i) = solver.eigenvectors().col(src);
  }
  out.decomposition.rank = k;
  return out;
}

/// Mean squared canonical correlation computed from the oracle route.
inline double cca_oracle_score(const ActivationMatrix& x, const ActivationMatrix& y) {
  const OracleDecomposition d = cca_oracle(x, y);
  double sum = 0.0;
  for (double rho : d.decomposition.coefficients) sum += rho * rho;
  return sum / static_cast<double>(x.n());
}

/// Cross-lingual pair whose neurons are strongly aligned while each side
/// also carries its own dominant direction (rank one, large eigenvalue,
/// spread thinly over all neurons). Neuron-wise correlation survives the
/// extra direction; the eigenvalue-weighted CKA is dominated by it.
struct DisagreementPair {
  ActivationMatrix x;
  ActivationMatrix y;
};

struct DisagreementParams {
  std::uint64_t seed = 7;
  Eigen::Index m = 1000;
  Eigen::Index n = 100;
  double rho = 0.95;
  double dominant_strength = 30.0;  // eigenvalue of the extra direction per example
};

inline DisagreementPair disagreement_pair(const DisagreementParams& p = {}) {
  const Matrix x0 = random_matrix(p.seed, p.m, p.n).data();
  const Matrix y0 = random_matrix(p.seed, p.m, p.n, Correlated{p.rho, 1}).data();
  Rng rng(p.seed, 0x4E);
  auto dominant = [&](void) -> Matrix {
    Vector scores = gaussian_matrix(rng, p.m, 1);
    Vector loading = gaussian_matrix(rng, p.n, 1);
    loading.normalize();
    return std::sqrt(p.dominant_strength) * scores * loading.transpose();
  };
  const Matrix dom_x = dominant();
  const Matrix dom_y = dominant();
  // Per-neuron rescaling of Y leaves ANC untouched.
  Matrix y = y0 + dom_y;
  for (Eigen::Index j = 0; j < p.n; ++j) y.col(j) *= 0.5 + static_cast<double>(j % 7);
  return DisagreementPair{ActivationMatrix(x0 + dom_x), ActivationMatrix(std::move(y))};
}

}  // namespace xsim::synth
