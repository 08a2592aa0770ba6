#pragma once

#include <cstddef>
#include <functional>

namespace spmx {

// Worker cap shared by every data-parallel kernel. 0 restores the default
// (std::thread::hardware_concurrency()).
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Splits [0, n) into contiguous chunks and runs body(begin, end) on up to
// thread_count() workers. Chunk boundaries never change results for
// per-item independent bodies.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk = 256);

// Work queue: runs job(i) for every i in [0, n) on up to thread_count()
// workers, handing out indices in order. Kernels called from a job run
// single-threaded.
void parallel_jobs(std::size_t n, const std::function<void(std::size_t)>& job);

}  // namespace spmx
