#ifndef MTCTL_THREADING_HPP
#define MTCTL_THREADING_HPP

namespace mtctl {

// Parallel width used by the conv kernels (MTCTL_NUM_THREADS caps it).
int conv_thread_count();

// Applies the MTCTL_NUM_THREADS cap to the OpenMP runtime as a whole.
// Call once at process start.
void init_threads();

} // namespace mtctl

#endif
