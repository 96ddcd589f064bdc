#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace microlocal {

// Worker cap shared by all scans. 0 means hardware concurrency.
void set_max_jobs(unsigned jobs);
unsigned max_jobs();

/*
 * Runs fn(i) for i in [0, n) on up to max_jobs() threads. Each index is
 * processed exactly once; results must be written to per-index slots so
 * the outcome does not depend on scheduling.
 */
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const unsigned jobs = static_cast<unsigned>(std::min<std::size_t>(max_jobs(), n));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace microlocal
