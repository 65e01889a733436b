#include "cspi/parallel.hpp"

#include <omp.h>

#include <cstdlib>

namespace cspi {

int thread_limit() {
  int n = omp_get_max_threads();
  if (const char* s = std::getenv("CSPI_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(s, &end, 10);
    if (end != s && v > 0 && v < n) n = static_cast<int>(v);
  }
  return n < 1 ? 1 : n;
}

}  // namespace cspi
