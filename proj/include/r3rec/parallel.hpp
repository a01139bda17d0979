#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace r3rec {

/// Runs fn(i) for i in [0, n) on up to `max_workers` threads. Results must be
/// written to per-index slots by the caller; any exception is rethrown after
/// all workers join (the first one observed wins).
template <typename Fn>
void parallel_for(std::size_t n, std::size_t max_workers, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(std::max<std::size_t>(max_workers, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace r3rec
