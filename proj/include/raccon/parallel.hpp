#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace raccon {

/// Runs fn(i) for i in [0, n) on at most `jobs` threads. Each index is handled
/// exactly once; callers write results into per-index slots so output order
/// never depends on scheduling. The first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
    const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

} // namespace raccon
