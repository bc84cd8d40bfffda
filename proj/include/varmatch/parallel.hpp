// parallel.hpp - deterministic block-parallel helpers.
//
// Work is split into fixed-size blocks whose layout does not depend on the
// thread count; per-block results are combined in block order. Threaded and
// single-threaded runs therefore produce bit-identical floating point output.

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace varmatch {

// Number of worker threads. Reads VARMATCH_THREADS once (clamped to
// [1, hardware_concurrency]); can be overridden programmatically.
int thread_count();
void set_thread_count(int n);

constexpr size_t kParallelBlock = 64;
// Work sizes below this run inline; the block structure is unchanged either way.
constexpr size_t kParallelThreshold = 256;

// Runs fn(block_index) for block_index in [0, num_blocks).
void run_blocks(size_t num_blocks, const std::function<void(size_t)>& fn);

// Deterministic blocked sum of term(i) for i in [0, count): each block of
// kParallelBlock consecutive indices is accumulated separately and the block
// sums are added in block order.
double blocked_sum(size_t count, const std::function<double(size_t)>& term);

// Applies fn to every index in [0, count), blocks possibly running on
// different threads. Writes must go to per-index slots.
void parallel_for(size_t count, const std::function<void(size_t)>& fn);

}  // namespace varmatch
