#include "mtctl/threading.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mtctl {

// Parallel width for the conv kernels. MTCTL_NUM_THREADS caps the OpenMP
// maximum; unset or invalid values fall back to the OpenMP default.
int conv_thread_count() {
#ifdef _OPENMP
    int n = omp_get_max_threads();
    if (const char* env = std::getenv("MTCTL_NUM_THREADS")) {
        try {
            const int cap = std::stoi(env);
            if (cap >= 1 && cap < n) n = cap;
        } catch (...) {
            // ignore malformed values
        }
    }
    return n;
#else
    return 1;
#endif
}

void init_threads() {
#ifdef _OPENMP
    omp_set_num_threads(conv_thread_count());
#endif
}

} // namespace mtctl
