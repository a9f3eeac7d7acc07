#include "battkit/parallel.hpp"

#include <omp.h>

#include <atomic>

namespace battkit::par {

namespace {
std::atomic<int> g_max_threads{0};
}

void set_max_threads(int n) { g_max_threads.store(n < 0 ? 0 : n); }

int max_threads() { return g_max_threads.load(); }

bool parallel_enabled() { return g_max_threads.load() != 1; }

int effective_threads() {
    const int cap = g_max_threads.load();
    const int avail = omp_get_max_threads();
    if (cap == 0) return avail;
    return cap < avail ? cap : avail;
}

} // namespace battkit::par
