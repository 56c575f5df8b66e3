#pragma once

// Domain types shared by every similarity index: activation matrices, the
// column-centered view the indexes consume, results, and the error type.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace xsim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
  InvalidData,
  InvalidParam,
  ShapeMismatch,
  AlignmentUnavailable,
  AlignmentMismatch,
  DegenerateInput,
  NumericalFailure,
  FormatError,
  IoError,
  MissingArtifact,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidData: return "InvalidData";
    case ErrorCode::InvalidParam: return "InvalidParam";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::AlignmentUnavailable: return "AlignmentUnavailable";
    case ErrorCode::AlignmentMismatch: return "AlignmentMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Layer activations: rows are examples, columns are neurons.
///
/// Construction validates m >= 2, n >= 1 and that every entry is finite;
/// the matrix is immutable afterwards.
class ActivationMatrix {
 public:
  explicit ActivationMatrix(Matrix data) : data_(std::move(data)) {
    if (data_.rows() < 2) {
      throw Error(ErrorCode::InvalidData,
                  "activation matrix needs at least 2 examples, got " + std::to_string(data_.rows()));
    }
    if (data_.cols() < 1) {
      throw Error(ErrorCode::InvalidData, "activation matrix needs at least 1 neuron");
    }
    if (!data_.allFinite()) {
      throw Error(ErrorCode::InvalidData, "activation matrix contains NaN or Inf");
    }
  }

  const Matrix& data() const noexcept { return data_; }
  Eigen::Index m() const noexcept { return data_.rows(); }
  Eigen::Index n() const noexcept { return data_.cols(); }

 private:
  Matrix data_;
};

/// Column-centered activations. Only `center_columns` produces these.
class CenteredMatrix {
 public:
  const Matrix& data() const noexcept { return data_; }
  Eigen::Index m() const noexcept { return data_.rows(); }
  Eigen::Index n() const noexcept { return data_.cols(); }

  /// Column indices whose centered values are identically zero.
  const std::vector<Eigen::Index>& zero_variance_columns() const noexcept { return dead_; }

  bool is_zero_variance(Eigen::Index col) const {
    return data_.col(col).squaredNorm() == 0.0;
  }

 private:
  friend CenteredMatrix center_columns(const ActivationMatrix&);
  friend CenteredMatrix center_columns(const CenteredMatrix&);

  explicit CenteredMatrix(Matrix data) : data_(std::move(data)) {
    for (Eigen::Index j = 0; j < data_.cols(); ++j) {
      if (data_.col(j).squaredNorm() == 0.0) dead_.push_back(j);
    }
  }

  Matrix data_;
  std::vector<Eigen::Index> dead_;
};

namespace detail {

// Constant columns become exact zeros so degeneracy tests can compare with 0.
inline Matrix centered_copy(const Matrix& a) {
  Matrix out = a;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    auto col = out.col(j);
    const double first = col(0);
    if ((col.array() == first).all()) {
      col.setZero();
      continue;
    }
    col.array() -= col.mean();
  }
  return out;
}

}  // namespace detail

inline CenteredMatrix center_columns(const ActivationMatrix& a) {
  return CenteredMatrix(detail::centered_copy(a.data()));
}

inline CenteredMatrix center_columns(const CenteredMatrix& a) {
  return CenteredMatrix(detail::centered_copy(a.data()));
}

enum class IndexKind { anc, cka, cca, svcca, pwcca };

inline std::string_view to_string(IndexKind kind) {
  switch (kind) {
    case IndexKind::anc: return "anc";
    case IndexKind::cka: return "cka";
    case IndexKind::cca: return "cca";
    case IndexKind::svcca: return "svcca";
    case IndexKind::pwcca: return "pwcca";
  }
  return "unknown";
}

inline IndexKind parse_index_kind(std::string_view name) {
  for (auto kind : {IndexKind::anc, IndexKind::cka, IndexKind::cca, IndexKind::svcca,
                    IndexKind::pwcca}) {
    if (to_string(kind) == name) return kind;
  }
  throw Error(ErrorCode::InvalidParam, "unknown index '" + std::string(name) + "'");
}

struct SimilarityResult {
  IndexKind index = IndexKind::anc;
  double score = 0.0;
  // Per-neuron |correlation| for ANC, canonical coefficients for the CCA family.
  std::optional<std::vector<double>> components;
  // ANC only: true where the neuron pair had zero variance on either side.
  std::vector<bool> degenerate;
  int degenerate_count = 0;
  // CCA family: the column spaces fill the centered sample space (m <= rank + 1).
  bool rank_deficient = false;
};

struct PairCheck {
  Eigen::Index m = 0;
  Eigen::Index n_x = 0;
  Eigen::Index n_y = 0;
  std::vector<Eigen::Index> zero_variance_x;
  std::vector<Eigen::Index> zero_variance_y;
};

namespace detail {

inline std::vector<Eigen::Index> constant_columns(const Matrix& a) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if ((a.col(j).array() == a(0, j)).all()) out.push_back(j);
  }
  return out;
}

inline std::string shape_string(const Matrix& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

inline void check_rows(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) {
    throw Error(ErrorCode::ShapeMismatch,
                "row counts differ: " + shape_string(x) + " vs " + shape_string(y));
  }
}

inline void check_columns(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols()) {
    throw Error(ErrorCode::AlignmentUnavailable,
                "neuron counts differ: " + shape_string(x) + " vs " + shape_string(y));
  }
}

}  // namespace detail

inline PairCheck validate_pair(const ActivationMatrix& x, const ActivationMatrix& y,
                               bool require_equal_n) {
  detail::check_rows(x.data(), y.data());
  if (require_equal_n) detail::check_columns(x.data(), y.data());
  return PairCheck{x.m(), x.n(), y.n(), detail::constant_columns(x.data()),
                   detail::constant_columns(y.data())};
}

}  // namespace xsim
