#pragma once

// Parallel-sentence matching probe: for every source row, find the target
// row with the highest cosine similarity and count how often it is the
// true translation.

#include "xsim/core.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace xsim {

struct MatchingReport {
  double accuracy = 0.0;  // hits / m
  Eigen::Index m = 0;
  Eigen::Index hits = 0;
  Eigen::Index degenerate_count = 0;  // zero-norm source rows, counted as misses
  std::string direction = "src->tgt";
};

namespace detail {

inline Matrix normalized_rows(const Matrix& a) {
  Matrix out = a;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

inline constexpr Eigen::Index kMatchBlock = 256;

}  // namespace detail

/// Brute-force cosine nearest neighbour of every row of `source` among the
/// rows of `target`. A query scores a hit only when its own index attains
/// the maximum similarity and no lower index ties it. Zero-norm target rows
/// have similarity 0 to everything.
///
/// Work is split into fixed 256-row query blocks; `threads` only changes
/// which worker handles a block, so the result is identical for any value.
inline MatchingReport matching_accuracy(const ActivationMatrix& source,
                                        const ActivationMatrix& target, unsigned threads = 1) {
  detail::check_rows(source.data(), target.data());
  if (source.n() != target.n()) {
    throw Error(ErrorCode::ShapeMismatch, "cosine matching needs equal dimensions: " +
                                              detail::shape_string(source.data()) + " vs " +
                                              detail::shape_string(target.data()));
  }
  const Eigen::Index m = source.m();
  const Matrix q = detail::normalized_rows(source.data());
  const Matrix t = detail::normalized_rows(target.data());

  std::vector<char> hit(static_cast<std::size_t>(m), 0);
  std::vector<char> dead(static_cast<std::size_t>(m), 0);
  const Eigen::Index blocks = (m + detail::kMatchBlock - 1) / detail::kMatchBlock;
  std::atomic<Eigen::Index> next{0};

  auto worker = [&] {
    for (Eigen::Index b = next++; b < blocks; b = next++) {
      const Eigen::Index start = b * detail::kMatchBlock;
      const Eigen::Index rows = std::min(detail::kMatchBlock, m - start);
      const Matrix sims = q.middleRows(start, rows) * t.transpose();
      for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index i = start + r;
        if (source.data().row(i).squaredNorm() == 0.0) {
          dead[static_cast<std::size_t>(i)] = 1;
          continue;
        }
        Eigen::Index best = 0;
        double best_sim = sims(r, 0);
        for (Eigen::Index j = 1; j < m; ++j) {
          if (sims(r, j) > best_sim) {
            best_sim = sims(r, j);
            best = j;
          }
        }
        hit[static_cast<std::size_t>(i)] = best == i ? 1 : 0;
      }
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(blocks)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < threads; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  MatchingReport report;
  report.m = m;
  report.hits = std::count(hit.begin(), hit.end(), 1);
  report.degenerate_count = std::count(dead.begin(), dead.end(), 1);
  report.accuracy = static_cast<double>(report.hits) / static_cast<double>(m);
  return report;
}

}  // namespace xsim
