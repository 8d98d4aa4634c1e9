#pragma once

#include <cstddef>
#include <functional>

namespace mle {

// Process-wide worker count used by the per-row parallel loops. Defaults to 1.
void set_thread_count(unsigned n);
unsigned thread_count();

// Runs body(begin, end) over disjoint chunks of [0, n). Chunks are contiguous
// and each index is visited exactly once, so per-index writes stay deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace mle
