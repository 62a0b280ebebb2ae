#pragma once

#include <cstdlib>
#include <exception>
#include <mutex>

#include "gradband/core.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gradband {

/// Worker count: explicit value if > 0, else GRADBAND_THREADS, else all cores.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("GRADBAND_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Runs body(i) for i in [0, count). Iterations must only write to their own
/// slots; the first exception thrown by any iteration is rethrown.
template <typename Body>
void parallel_for(Index count, int threads, Body&& body) {
  std::exception_ptr error;
  std::mutex error_mutex;
  [[maybe_unused]] const int workers = resolve_threads(threads);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 4) num_threads(workers)
#endif
  for (Index i = 0; i < count; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace gradband
