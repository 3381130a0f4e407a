// SPDX-License-Identifier: Apache-2.0
#include "octoconv/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace octoconv {

namespace {
std::atomic<int> g_max_threads{1};
}

void set_max_threads(int n) { g_max_threads = std::max(1, n); }
int max_threads() { return g_max_threads; }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(max_threads()), n);
  if (workers <= 1) {
    if (n) body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * chunk, end = std::min(n, begin + chunk);
    if (begin < end) pool.emplace_back(body, begin, end);
  }
  body(0, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace octoconv
