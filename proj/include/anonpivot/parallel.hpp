// Copyright 2026 The anonpivot Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace anonpivot {

/// Calls fn(i) for i in [0, n) on up to `jobs` threads. Workers pull indices
/// in order; the first exception (lowest index) is rethrown once all finish.
template <typename Fn>
void parallel_for_index(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Ordered map over a worker pool: out[i] = fn(in[i]) regardless of which
/// worker finished first.
template <typename T, typename Fn>
auto parallel_map(const std::vector<T>& in, std::size_t jobs, Fn&& fn) {
  using R = decltype(fn(in[0]));
  std::vector<R> out(in.size());
  parallel_for_index(in.size(), jobs, [&](std::size_t i) { out[i] = fn(in[i]); });
  return out;
}

}  // namespace anonpivot
