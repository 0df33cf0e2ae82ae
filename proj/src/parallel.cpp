#include "spectropitch/parallel.hpp"

#include <atomic>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace spectropitch {

namespace {

std::atomic<int> g_thread_override{0};

int env_threads() {
    static const int cached = [] {
        const char* v = std::getenv("SPECTROPITCH_THREADS");
        if (v == nullptr) return 0;
        const long n = std::strtol(v, nullptr, 10);
        return n > 0 ? static_cast<int>(n) : 0;
    }();
    return cached;
}

int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace

void set_max_threads(int n) { g_thread_override.store(n < 0 ? 0 : n); }

int max_threads() {
    const int forced = g_thread_override.load();
    if (forced > 0) return forced;
    const int env = env_threads();
    if (env > 0) return env;
    return hardware_threads();
}

namespace detail {

void run_parallel(std::size_t n, void (*thunk)(void*, std::size_t), void* ctx) {
    const int threads = max_threads();
#ifdef _OPENMP
    if (threads > 1 && n > 1) {
        const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) num_threads(threads)
        for (std::int64_t i = 0; i < count; ++i) {
            thunk(ctx, static_cast<std::size_t>(i));
        }
        return;
    }
#endif
    (void)threads;
    for (std::size_t i = 0; i < n; ++i) thunk(ctx, i);
}

}  // namespace detail

}  // namespace spectropitch
