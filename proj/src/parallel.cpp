#include "wasscert/parallel.hpp"

#include <cstdlib>
#include <string>

#include <omp.h>

namespace wasscert {

int worker_count() {
  if (const char* env = std::getenv("WASSCERT_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return omp_get_max_threads();
}

}  // namespace wasscert
