// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace octoconv {

/// Process-wide cap on worker threads (default 1). Values < 1 are clamped.
void set_max_threads(int n);
int max_threads();

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunking depends
/// only on n and max_threads(), so results are reproducible for a fixed
/// thread cap.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace octoconv
