#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <span>
#include <thread>
#include <vector>

namespace pgrad::detail {

// Pairwise (tree) summation in index order. The tree shape depends only on the
// length, so results are bit-stable across runs and thread counts.
inline double pairwise_sum(std::span<const double> terms) {
  const std::size_t n = terms.size();
  if (n == 0) return 0.0;
  if (n == 1) return terms[0];
  if (n == 2) return terms[0] + terms[1];
  const std::size_t half = n / 2;
  return pairwise_sum(terms.first(half)) + pairwise_sum(terms.subspan(half));
}

inline std::atomic<unsigned>& thread_cap() {
  static std::atomic<unsigned> cap{1};
  return cap;
}

/// Upper bound on worker threads used by node loops (1 = sequential).
inline void set_max_threads(unsigned n) { thread_cap().store(std::max(1u, n)); }
inline unsigned max_threads() { return thread_cap().load(); }

// Below this many nodes a loop always runs on the calling thread.
inline constexpr std::size_t kParallelThreshold = 4096;

/// Calls fn(k) for k in [0, count). Work is split into contiguous chunks when
/// threading is enabled; fn must only write to slots owned by k.
template <class Fn>
void for_each_index(std::size_t count, Fn&& fn) {
  const unsigned threads = max_threads();
  if (threads <= 1 || count < kParallelThreshold) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  const std::size_t chunk = (count + threads - 1) / threads;
  std::vector<std::exception_ptr> failures(threads);
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(count, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([lo, hi, w, &fn, &failures] {
        try {
          for (std::size_t k = lo; k < hi; ++k) fn(k);
        } catch (...) {
          failures[w] = std::current_exception();
        }
      });
    }
  }
  // Rethrow the failure from the lowest chunk so the reported error does not depend on timing.
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
}

}  // namespace pgrad::detail
