#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace multibal {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Results must be
/// written to per-index slots so the outcome does not depend on scheduling.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)> &fn) {
    const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(workers, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) { fn(i); }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) { first_error = std::current_exception(); }
                }
            }
        });
    }
    for (auto &t : pool) { t.join(); }
    if (first_error) { std::rethrow_exception(first_error); }
}

}  // namespace multibal
