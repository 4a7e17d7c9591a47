#include "hyperfc/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace hyperfc {

void tune_allocator_for_tensors() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 64 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 64 * 1024 * 1024);
#endif
}

namespace {
std::atomic<int> g_worker_cap{0};
}

void set_worker_cap(int workers) { g_worker_cap.store(workers); }

int worker_cap() { return g_worker_cap.load(); }

int workers_for(size_t n) {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    int cap = g_worker_cap.load();
    if (cap > 0) hw = std::min(hw, cap);
    return static_cast<int>(std::min<size_t>(static_cast<size_t>(hw), std::max<size_t>(n, 1)));
}

int parallel_for_lanes(size_t n, const std::function<void(size_t, int)>& fn) {
    int nw = workers_for(n);
    if (nw <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i, 0);
        return 1;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(nw));
    for (int w = 0; w < nw; ++w) {
        threads.emplace_back([&, w]() {
            try {
                for (size_t i = static_cast<size_t>(w); i < n; i += static_cast<size_t>(nw))
                    fn(i, w);
            } catch (...) {
                errors[static_cast<size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return nw;
}

void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
    parallel_for_lanes(n, [&](size_t i, int) { fn(i); });
}

} // namespace hyperfc
