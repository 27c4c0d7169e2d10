#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace orderpipe {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Callers own result
/// placement (typically into a pre-sized vector indexed by i), so output
/// ordering is independent of scheduling.
template <typename Fn>
void parallel_for(size_t n, int workers, Fn&& fn) {
    if (n == 0) return;
    size_t thread_count = static_cast<size_t>(workers < 1 ? 1 : workers);
    if (thread_count > n) thread_count = n;
    if (thread_count == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(thread_count);
    for (size_t t = 0; t < thread_count; ++t) {
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace orderpipe
