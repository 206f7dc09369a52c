#pragma once

#include <cstdint>
#include <functional>

namespace axf {

// Process-wide worker count. 0 = hardware concurrency. Overridable via the
// AXF_THREADS environment variable (checked once, at first use).
void set_threads(int n);
int threads();

// Runs fn(i) for i in [0, n). Work is split into contiguous index chunks,
// one per worker. Each index is processed by exactly one thread with the
// same internal arithmetic order as a serial run, so results are identical
// for every thread count provided the bodies write disjoint outputs.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

// Chunked variant: fn(begin, end) per contiguous range.
void parallel_for_chunks(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace axf
