#pragma once

// Pairwise reductions over a set of embedded samples. Each kernel has a
// serial reference and an OpenMP version; the dispatching entry point picks
// the parallel one once the pair count makes it worthwhile.

#include <cstddef>
#include <cstdint>
#include <span>

namespace cmdtriage::kernels {

/// Row-major points. Rows flagged in `degenerate` take part in every pair
/// with `sentinel` as their distance (or 0 as their cosine similarity).
struct PointSet {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::span<const double> data;
  std::span<const std::uint8_t> degenerate;  // empty or `count` flags
  double sentinel = 0.0;

  bool is_degenerate(std::size_t i) const { return !degenerate.empty() && degenerate[i] != 0; }
};

inline constexpr std::size_t kParallelMinPoints = 64;

/// Sum over unordered pairs i<j of the Euclidean distance.
double pair_distance_sum_serial(const PointSet& points);
double pair_distance_sum_parallel(const PointSet& points);
double pair_distance_sum(const PointSet& points);

/// Sum over unordered pairs i<j of the cosine similarity.
double pair_cosine_sum_serial(const PointSet& points);
double pair_cosine_sum_parallel(const PointSet& points);
double pair_cosine_sum(const PointSet& points);

inline double pair_count(std::size_t n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); }

/// Number of worker threads OpenMP would use; 1 when built without OpenMP.
int max_threads();

}  // namespace cmdtriage::kernels
