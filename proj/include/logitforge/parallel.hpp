#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace logitforge {

// OpenMP loop over [0, n) that rethrows the exception of the lowest failing
// index on the calling thread. Exceptions must not cross an OpenMP region.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  std::exception_ptr first;
  std::size_t first_index = n;
  std::mutex guard;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (static_cast<std::size_t>(i) < first_index) {
        first_index = static_cast<std::size_t>(i);
        first = std::current_exception();
      }
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace logitforge
