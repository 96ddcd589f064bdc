#include "microlocal/parallel.hpp"

#include <atomic>

namespace microlocal {

namespace {
std::atomic<unsigned> g_max_jobs{0};
}

void set_max_jobs(unsigned jobs) { g_max_jobs.store(jobs); }

unsigned max_jobs() {
    const unsigned j = g_max_jobs.load();
    if (j != 0) return j;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace microlocal
