#pragma once

namespace nfx::kernels {

/// Process-wide switch between the OpenMP kernels and their serial reference
/// twins. Both paths compute bit-identical results; the switch exists for
/// benchmarking and for pinning down a kernel when debugging.
void set_parallel(bool on);
bool parallel_enabled();

/// Number of OpenMP threads the parallel kernels will use.
int thread_count();

}  // namespace nfx::kernels
