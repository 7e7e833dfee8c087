#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stabledyn {

// Parallel map over [0, n). fn(i) must write only to slot i of preallocated
// output; reductions happen serially afterwards, so results are bitwise
// identical for any thread count.
template <class F>
void parallel_for(std::ptrdiff_t n, F &&fn) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline int thread_index() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

}  // namespace stabledyn
