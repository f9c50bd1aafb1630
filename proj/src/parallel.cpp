#include "retfuse/parallel.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace retfuse {

namespace {
std::atomic<int> g_jobs{1};
}

void set_jobs(int n) {
  if (n < 1) n = 1;
  g_jobs.store(n);
#ifdef _OPENMP
  omp_set_num_threads(n);
  omp_set_max_active_levels(1);
#endif
}

int jobs() { return g_jobs.load(); }

}  // namespace retfuse
