#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace deconv {

// Thread count resolution: explicit n, else DECONV_THREADS env, else OpenMP default.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DECONV_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int requested) {
#ifdef _OPENMP
  omp_set_num_threads(resolve_threads(requested));
#else
  (void)requested;
#endif
}

// Data-parallel loop over [0, n).  Results written to disjoint slots stay
// deterministic regardless of the schedule.
template <class F>
void parallel_for(std::size_t n, F&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    body(static_cast<std::size_t>(i));
#else
  for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

// Like parallel_for but with a dynamic schedule, for uneven cell costs
// (Monte Carlo cells).  Callers must keep per-cell outputs in disjoint slots.
template <class F>
void parallel_for_dynamic(std::size_t n, F&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    body(static_cast<std::size_t>(i));
#else
  for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

} // namespace deconv
