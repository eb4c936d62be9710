#include "cmdtriage/kernels.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cmdtriage::kernels {

namespace {

inline double euclid(const double* a, const double* b, std::size_t dim) {
  double sq = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = a[d] - b[d];
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

inline double cosine(const double* a, const double* b, std::size_t dim) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    dot += a[d] * b[d];
    na += a[d] * a[d];
    nb += b[d] * b[d];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Sum over j>i of one row's pair terms.
template <typename PairFn>
inline double row_sum(const PointSet& p, std::size_t i, double degenerate_value, PairFn fn) {
  double s = 0.0;
  const double* a = p.data.data() + i * p.dim;
  for (std::size_t j = i + 1; j < p.count; ++j) {
    if (p.is_degenerate(i) || p.is_degenerate(j))
      s += degenerate_value;
    else
      s += fn(a, p.data.data() + j * p.dim, p.dim);
  }
  return s;
}

}  // namespace

double pair_distance_sum_serial(const PointSet& p) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.count; ++i) sum += row_sum(p, i, p.sentinel, euclid);
  return sum;
}

double pair_distance_sum_parallel(const PointSet& p) {
  double sum = 0.0;
  const auto n = static_cast<long long>(p.count);
#pragma omp parallel for reduction(+ : sum) schedule(dynamic, 4)
  for (long long i = 0; i < n; ++i) sum += row_sum(p, static_cast<std::size_t>(i), p.sentinel, euclid);
  return sum;
}

double pair_distance_sum(const PointSet& p) {
  return p.count >= kParallelMinPoints ? pair_distance_sum_parallel(p) : pair_distance_sum_serial(p);
}

double pair_cosine_sum_serial(const PointSet& p) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.count; ++i) sum += row_sum(p, i, 0.0, cosine);
  return sum;
}

double pair_cosine_sum_parallel(const PointSet& p) {
  double sum = 0.0;
  const auto n = static_cast<long long>(p.count);
#pragma omp parallel for reduction(+ : sum) schedule(dynamic, 4)
  for (long long i = 0; i < n; ++i) sum += row_sum(p, static_cast<std::size_t>(i), 0.0, cosine);
  return sum;
}

double pair_cosine_sum(const PointSet& p) {
  return p.count >= kParallelMinPoints ? pair_cosine_sum_parallel(p) : pair_cosine_sum_serial(p);
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace cmdtriage::kernels
