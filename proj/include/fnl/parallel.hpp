#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fnl {

// Runs f(i) for every i in [0, count) on `threads` workers (0 = hardware
// concurrency). Items are claimed from a shared counter, so callers must
// write results by index; outputs are then independent of scheduling and a
// run is reproducible for any thread count.
template <typename F>
void parallel_for(std::size_t count, std::size_t threads, F&& f) {
    if (count == 0) return;
    if (threads == 0) {
        const unsigned hc = std::thread::hardware_concurrency();
        threads = hc ? hc : 1;
    }
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) f(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) return;
            try {
                f(i);
            } catch (...) {
                {
                    const std::lock_guard<std::mutex> lk(error_mu);
                    if (!error) error = std::current_exception();
                }
                next.store(count, std::memory_order_relaxed);
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace fnl
