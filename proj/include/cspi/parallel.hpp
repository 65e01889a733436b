#pragma once

namespace cspi {

// Worker cap for the OpenMP kernels: omp_get_max_threads(), further capped
// by the CSPI_THREADS environment variable when set to a positive integer.
// Re-read on every call so tests can adjust the cap at runtime.
int thread_limit();

}  // namespace cspi
