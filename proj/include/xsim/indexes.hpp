#pragma once

// Layer similarity indexes on column-centered activations: ANC, Linear CKA,
// and the CCA family (mean squared CCA, SVCCA, PWCCA).

#include "xsim/core.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

namespace xsim {

/// Singular values below this fraction of the largest count as zero in the
/// CCA family.
inline constexpr double kRankTolerance = 1e-10;

inline constexpr double kDefaultSvccaThreshold = 0.99;

/// Eigenpairs of the m x m gram matrix X X^T of a centered layer, sorted by
/// descending eigenvalue. Eigenvectors live in R^m (one entry per example)
/// and are the dominant correlation directions ("eigenneurons").
struct GramSpectrum {
  Vector eigenvalues;
  Matrix eigenvectors;  // column i pairs with eigenvalues(i)

  /// Number of eigenvalues above kRankTolerance * largest.
  Eigen::Index rank() const {
    if (eigenvalues.size() == 0 || eigenvalues(0) <= 0.0) return 0;
    const double cut = kRankTolerance * eigenvalues(0);
    return static_cast<Eigen::Index>((eigenvalues.array() > cut).count());
  }

  Matrix reconstruct() const {
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
  }
};

struct CanonicalDecomposition {
  std::vector<double> coefficients;  // descending, in [0, 1]
  std::optional<std::vector<double>> weights;
  Eigen::Index rank = 0;
};

inline GramSpectrum gram_spectrum(const CenteredMatrix& x) {
  const Matrix gram = x.data() * x.data().transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericalFailure, "gram eigendecomposition did not converge");
  }
  // Eigen returns ascending order.
  const Eigen::Index m = gram.rows();
  GramSpectrum out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  const double scale = std::max(1.0, out.eigenvalues(0));
  for (Eigen::Index i = 0; i < m; ++i) {
    double& value = out.eigenvalues(i);
    if (value < -1e-10 * scale) {
      throw Error(ErrorCode::NumericalFailure,
                  "gram matrix has a negative eigenvalue " + std::to_string(value));
    }
    value = std::max(value, 0.0);
  }
  return out;
}

enum class CkaMethod { spectral, gram };

namespace detail {

inline void require_nonzero(const CenteredMatrix& a, const char* side) {
  if (a.data().squaredNorm() == 0.0) {
    throw Error(ErrorCode::DegenerateInput, std::string("all-zero centered matrix on side ") + side);
  }
}

inline double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

// Literal evaluation of the eigenvalue-weighted subspace overlap.
inline double cka_spectral(const GramSpectrum& sx, const GramSpectrum& sy) {
  const Matrix overlap = sx.eigenvectors.transpose() * sy.eigenvectors;
  const double numerator =
      (sx.eigenvalues.asDiagonal() * overlap.cwiseAbs2() * sy.eigenvalues.asDiagonal()).sum();
  return numerator / (sx.eigenvalues.norm() * sy.eigenvalues.norm());
}

inline double cka_gram(const Matrix& x, const Matrix& y) {
  const double cross = (y.transpose() * x).squaredNorm();
  const double self_x = (x.transpose() * x).norm();
  const double self_y = (y.transpose() * y).norm();
  return cross / (self_x * self_y);
}

}  // namespace detail

inline SimilarityResult linear_cka(const CenteredMatrix& x, const CenteredMatrix& y,
                                   CkaMethod method = CkaMethod::gram) {
  detail::check_rows(x.data(), y.data());
  detail::require_nonzero(x, "X");
  detail::require_nonzero(y, "Y");
  SimilarityResult out;
  out.index = IndexKind::cka;
  out.score = method == CkaMethod::spectral
                  ? detail::cka_spectral(gram_spectrum(x), gram_spectrum(y))
                  : detail::cka_gram(x.data(), y.data());
  return out;
}

namespace detail {

struct Basis {
  Matrix u;  // m x rank, orthonormal columns spanning the column space
  Vector singular_values;
  Eigen::Index rank = 0;
};

inline Basis orthonormal_basis(const Matrix& a) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU);
  if (svd.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericalFailure, "SVD did not converge");
  }
  const Vector& s = svd.singularValues();
  Eigen::Index rank = 0;
  if (s.size() > 0 && s(0) > 0.0) {
    const double cut = kRankTolerance * s(0);
    while (rank < s.size() && s(rank) > cut) ++rank;
  }
  return Basis{svd.matrixU().leftCols(rank), s.head(rank), rank};
}

// Smallest leading block of singular directions carrying at least
// `threshold` of the squared singular-value mass.
inline Basis truncate_by_variance(const Basis& b, double threshold) {
  const Vector mass = b.singular_values.array().square();
  const double total = mass.sum();
  double kept = 0.0;
  Eigen::Index k = 0;
  while (k < b.rank) {
    kept += mass(k);
    ++k;
    if (kept >= threshold * total) break;
  }
  return Basis{b.u.leftCols(k), b.singular_values.head(k), k};
}

struct CanonicalCore {
  Matrix overlap;  // Ux^T Uy
  std::vector<double> rho;
  Matrix x_rotation;  // left singular vectors of the overlap
};

inline CanonicalCore canonical_core(const Basis& bx, const Basis& by) {
  CanonicalCore core;
  core.overlap = bx.u.transpose() * by.u;
  Eigen::JacobiSVD<Matrix> svd(core.overlap, Eigen::ComputeFullU);
  const Eigen::Index count = std::min(bx.rank, by.rank);
  core.rho.reserve(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    core.rho.push_back(clamp_unit(svd.singularValues()(i)));
  }
  core.x_rotation = svd.matrixU();
  return core;
}

inline void require_rank(const Basis& b, const char* side) {
  if (b.rank == 0) {
    throw Error(ErrorCode::DegenerateInput, std::string("rank 0 on side ") + side);
  }
}

inline bool saturates(const Basis& b, Eigen::Index m) { return b.rank + 1 >= m; }

inline SimilarityResult cca_from_bases(const Basis& bx, const Basis& by, Eigen::Index m,
                                       IndexKind kind) {
  require_rank(bx, "X");
  require_rank(by, "Y");
  const CanonicalCore core = canonical_core(bx, by);
  SimilarityResult out;
  out.index = kind;
  // Sum of squared cosines between the two bases, over the rank of X.
  out.score = core.overlap.squaredNorm() / static_cast<double>(bx.rank);
  out.components = core.rho;
  out.rank_deficient = saturates(bx, m) || saturates(by, m);
  return out;
}

}  // namespace detail

/// Mean squared canonical correlation, normalized by the numerical rank of X.
inline SimilarityResult cca(const CenteredMatrix& x, const CenteredMatrix& y) {
  detail::check_rows(x.data(), y.data());
  return detail::cca_from_bases(detail::orthonormal_basis(x.data()),
                                detail::orthonormal_basis(y.data()), x.m(), IndexKind::cca);
}

inline SimilarityResult svcca(const CenteredMatrix& x, const CenteredMatrix& y,
                              double variance_threshold = kDefaultSvccaThreshold) {
  if (!(variance_threshold > 0.0 && variance_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidParam, "SVCCA variance threshold must lie in (0, 1]");
  }
  detail::check_rows(x.data(), y.data());
  const detail::Basis bx = detail::orthonormal_basis(x.data());
  const detail::Basis by = detail::orthonormal_basis(y.data());
  detail::require_rank(bx, "X");
  detail::require_rank(by, "Y");
  return detail::cca_from_bases(detail::truncate_by_variance(bx, variance_threshold),
                                detail::truncate_by_variance(by, variance_threshold), x.m(),
                                IndexKind::svcca);
}

namespace detail {

struct Weighted {
  Basis bx;
  Basis by;
  CanonicalCore core;
  Vector weights;
};

// Weight of canonical pair i: total |projection| of X's neurons onto the
// i-th canonical variate of X, normalized to sum to 1.
inline Weighted projection_weighting(const CenteredMatrix& x, const CenteredMatrix& y) {
  check_rows(x.data(), y.data());
  Weighted w{orthonormal_basis(x.data()), orthonormal_basis(y.data()), {}, {}};
  require_rank(w.bx, "X");
  require_rank(w.by, "Y");
  w.core = canonical_core(w.bx, w.by);
  const auto count = static_cast<Eigen::Index>(w.core.rho.size());
  const Matrix variates = w.bx.u * w.core.x_rotation.leftCols(count);
  w.weights = (variates.transpose() * x.data()).cwiseAbs().rowwise().sum();
  w.weights /= w.weights.sum();
  return w;
}

}  // namespace detail

/// Projection-weighted CCA. X is the reference side, so in general
/// pwcca(X, Y) != pwcca(Y, X).
inline SimilarityResult pwcca(const CenteredMatrix& x, const CenteredMatrix& y) {
  const detail::Weighted w = detail::projection_weighting(x, y);
  double score = 0.0;
  for (std::size_t i = 0; i < w.core.rho.size(); ++i) {
    score += w.weights(static_cast<Eigen::Index>(i)) * w.core.rho[i];
  }
  SimilarityResult out;
  out.index = IndexKind::pwcca;
  out.score = detail::clamp_unit(score);
  out.components = w.core.rho;
  out.rank_deficient = detail::saturates(w.bx, x.m()) || detail::saturates(w.by, x.m());
  return out;
}

/// Canonical coefficients from the SVD route with their PWCCA weights.
inline CanonicalDecomposition canonical_decomposition(const CenteredMatrix& x,
                                                      const CenteredMatrix& y) {
  const detail::Weighted w = detail::projection_weighting(x, y);
  return CanonicalDecomposition{
      w.core.rho, std::vector<double>(w.weights.data(), w.weights.data() + w.weights.size()),
      std::min(w.bx.rank, w.by.rank)};
}

/// Pearson correlation of two centered vectors; nullopt when either has
/// zero norm.
inline std::optional<double> pearson(const Eigen::Ref<const Vector>& zx,
                                     const Eigen::Ref<const Vector>& zy) {
  if (zx.size() != zy.size()) {
    throw Error(ErrorCode::ShapeMismatch, "pearson: vector lengths differ (" +
                                              std::to_string(zx.size()) + " vs " +
                                              std::to_string(zy.size()) + ")");
  }
  const double nx = zx.norm();
  const double ny = zy.norm();
  if (nx == 0.0 || ny == 0.0) return std::nullopt;
  return std::clamp(zx.dot(zy) / (nx * ny), -1.0, 1.0);
}

enum class DegeneratePolicy { zero, skip };

inline std::string_view to_string(DegeneratePolicy p) {
  return p == DegeneratePolicy::zero ? "zero" : "skip";
}

inline DegeneratePolicy parse_degenerate_policy(std::string_view name) {
  if (name == "zero") return DegeneratePolicy::zero;
  if (name == "skip") return DegeneratePolicy::skip;
  throw Error(ErrorCode::InvalidParam, "unknown ANC policy '" + std::string(name) + "'");
}

namespace detail {

// `take_abs = false` exists only for the validator's fault-injection mode.
inline SimilarityResult anc_impl(const CenteredMatrix& x, const CenteredMatrix& y,
                                 DegeneratePolicy policy, bool take_abs) {
  check_rows(x.data(), y.data());
  check_columns(x.data(), y.data());
  const Eigen::Index n = x.n();

  const Eigen::RowVectorXd dots = x.data().cwiseProduct(y.data()).colwise().sum();
  const Eigen::RowVectorXd norm_x = x.data().colwise().norm();
  const Eigen::RowVectorXd norm_y = y.data().colwise().norm();

  SimilarityResult out;
  out.index = IndexKind::anc;
  std::vector<double> components(static_cast<std::size_t>(n), 0.0);
  out.degenerate.assign(static_cast<std::size_t>(n), false);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (norm_x(i) == 0.0 || norm_y(i) == 0.0) {
      out.degenerate[k] = true;
      ++out.degenerate_count;
      continue;
    }
    const double r = std::clamp(dots(i) / (norm_x(i) * norm_y(i)), -1.0, 1.0);
    components[k] = take_abs ? std::abs(r) : r;
    sum += components[k];
  }
  if (out.degenerate_count == n) {
    throw Error(ErrorCode::DegenerateInput, "every neuron pair has zero variance");
  }
  const double denom =
      policy == DegeneratePolicy::zero ? static_cast<double>(n)
                                       : static_cast<double>(n - out.degenerate_count);
  out.score = sum / denom;
  out.components = std::move(components);
  return out;
}

}  // namespace detail

/// Average Neuron-Wise Correlation: mean absolute Pearson correlation of
/// neuron i in X with neuron i in Y. Neurons must be aligned one-to-one.
///
/// Components hold every per-neuron |correlation|; zero-variance pairs are
/// stored as 0 and flagged in `degenerate`. Under `zero` they count as 0 in
/// the average, under `skip` they are left out of it.
inline SimilarityResult anc(const CenteredMatrix& x, const CenteredMatrix& y,
                            DegeneratePolicy policy = DegeneratePolicy::zero) {
  return detail::anc_impl(x, y, policy, true);
}

struct IndexOptions {
  double svcca_threshold = kDefaultSvccaThreshold;
  DegeneratePolicy anc_policy = DegeneratePolicy::zero;
  CkaMethod cka_method = CkaMethod::gram;
};

inline SimilarityResult compute_index(IndexKind kind, const CenteredMatrix& x,
                                      const CenteredMatrix& y, const IndexOptions& opts = {}) {
  switch (kind) {
    case IndexKind::anc: return anc(x, y, opts.anc_policy);
    case IndexKind::cka: return linear_cka(x, y, opts.cka_method);
    case IndexKind::cca: return cca(x, y);
    case IndexKind::svcca: return svcca(x, y, opts.svcca_threshold);
    case IndexKind::pwcca: return pwcca(x, y);
  }
  throw Error(ErrorCode::InvalidParam, "unknown index kind");
}

}  // namespace xsim
