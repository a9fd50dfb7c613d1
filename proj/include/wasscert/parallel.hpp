#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace wasscert {

/// Worker cap: WASSCERT_THREADS if set to a positive integer, else the
/// OpenMP default (machine parallelism).
int worker_count();

/// Runs job(i) for i in [0, n) on the worker pool. Jobs must write only to
/// their own slot; callers fold results in index order afterwards, so the
/// outcome does not depend on completion order. If jobs throw, the exception
/// of the lowest failing index is rethrown after all jobs finish.
template <typename Job>
void parallel_jobs(std::size_t n, Job&& job) {
  std::vector<std::exception_ptr> errors(n);
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_count())
  for (long i = 0; i < count; ++i) {
    try {
      job(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace wasscert
