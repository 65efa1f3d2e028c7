#pragma once
#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace gesso {

/// Worker cap: GESSO_THREADS if set to a positive integer, else the hardware concurrency.
inline unsigned max_workers()
{
    if (const char* env = std::getenv("GESSO_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/**
 * Runs fn(0) ... fn(count - 1) on up to max_workers() threads. Each index is
 * handled exactly once; results should be written to per-index slots. The
 * first exception thrown by any task is rethrown after all workers join.
 */
template <class F>
void parallel_for(std::size_t count, F&& fn)
{
    const std::size_t workers = std::min<std::size_t>(max_workers(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace gesso
