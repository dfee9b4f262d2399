#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace facade {

inline unsigned
resolve_threads(unsigned requested)
{
  if (requested > 0)
    return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(begin, end) over contiguous chunks of [0, n). The first exception
/// thrown by any worker is rethrown on the calling thread.
template<class Fn>
void
parallel_for(std::size_t n, unsigned threads, Fn&& fn)
{
  threads = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    fn(std::size_t{ 0 }, n);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> workers;
  workers.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = std::min(n, t * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    workers.emplace_back([&, t, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers)
    w.join();
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);
}

} // namespace facade
