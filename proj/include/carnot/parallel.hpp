#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace carnot {

/// Worker count: hardware concurrency capped by CARNOT_LAB_THREADS.
inline unsigned thread_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("CARNOT_LAB_THREADS")) {
    try {
      const long v = std::stol(cap);
      if (v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
    } catch (const std::exception&) {
    }
  }
  return n;
}

namespace detail {
inline bool& inside_worker() {
  thread_local bool flag = false;
  return flag;
}
}  // namespace detail

/// Runs body(i) for i in [0, n). Results must be written to per-index slots;
/// the exception of the lowest failing index is rethrown, so failures are
/// reported the same way regardless of scheduling. Nested calls run serially.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const unsigned workers =
      detail::inside_worker() ? 1u : static_cast<unsigned>(std::min<std::size_t>(thread_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    const bool outer = detail::inside_worker();
    detail::inside_worker() = true;
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    detail::inside_worker() = outer;
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace carnot
