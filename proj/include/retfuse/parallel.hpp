#pragma once

namespace retfuse {

// Caps the OpenMP thread count for all kernels and fold/trial loops.
// jobs() == 1 keeps everything on the calling thread.
void set_jobs(int n);
int jobs();

}  // namespace retfuse
