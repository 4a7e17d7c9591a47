#ifndef HYPERFC_PARALLEL_HPP
#define HYPERFC_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace hyperfc {

// Keeps large tensor buffers on the heap instead of per-allocation
// mmap/munmap cycles. Call once at process start in compute-heavy
// binaries.
void tune_allocator_for_tensors();

// Caps worker threads process-wide (the CLI --workers flag lands here).
// 0 keeps the hardware default.
void set_worker_cap(int workers);
int worker_cap();

// Effective worker count for `n` independent items.
int workers_for(size_t n);

// Runs fn(i) for i in [0, n) on up to workers_for(n) threads.
// Items are assigned statically (worker w takes i = w, w+W, w+2W, ...),
// so any output written to per-item slots is identical for every worker
// count. Exceptions are captured and rethrown on the calling thread.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

// Same, but hands each worker its own lane id in [0, nlanes) along with
// the item index; lane count is returned. Used when workers accumulate
// into lane-local buffers that the caller reduces in lane order.
int parallel_for_lanes(size_t n, const std::function<void(size_t item, int lane)>& fn);

} // namespace hyperfc

#endif
