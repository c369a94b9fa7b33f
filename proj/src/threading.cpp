#include "sparsect/threading.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif
#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace sparsect {

void apply_thread_cap_from_env() {
#ifdef _OPENMP
    if (const char* env = std::getenv("SPARSECT_THREADS")) {
        try {
            int n = std::stoi(env);
            if (n >= 1) omp_set_num_threads(n);
        } catch (...) {
            // ignore malformed values; OpenMP defaults apply
        }
    }
#endif
#if defined(__GLIBC__)
    // activation and gradient buffers are megabyte-sized and recreated every
    // training step; keep them on the heap instead of mmap so the pages are
    // reused rather than refaulted
    mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
#endif
}

}  // namespace sparsect
