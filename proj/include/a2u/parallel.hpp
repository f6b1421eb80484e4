/* Copyright (c) 2026 The a2u-lab Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#ifndef A2U_PARALLEL_HPP_
#define A2U_PARALLEL_HPP_

#include <exception>
#include <thread>
#include <vector>

#include "a2u/check.hpp"

namespace a2u {

/// Worker count for batch-parallel regions. 1 (the default) runs everything
/// inline on the calling thread.
inline int& num_threads() {
  static int n = 1;
  return n;
}

inline void set_num_threads(int n) {
  A2U_CHECK(n >= 1, "thread count must be >= 1, got " << n);
  num_threads() = n;
}

/// Runs f(lo, hi) over a static partition of [begin, end). Partitioning
/// depends only on (begin, end, thread count), so results are reproducible
/// for a fixed configuration as long as ranges write disjoint outputs.
template <typename F>
void parallel_ranges(int64_t begin, int64_t end, F&& f) {
  const int64_t total = end - begin;
  const int workers = static_cast<int>(std::min<int64_t>(num_threads(), total));
  if (workers <= 1) {
    if (total > 0) f(begin, end);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  const int64_t chunk = (total + workers - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    const int64_t lo = begin + t * chunk;
    const int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back([&, t, lo, hi]() {
      try {
        f(lo, hi);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace a2u

#endif  // A2U_PARALLEL_HPP_
