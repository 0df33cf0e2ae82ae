#pragma once

#include <cstddef>
#include <cstdint>

namespace spectropitch {

// Worker cap. 0 restores the default (SPECTROPITCH_THREADS env var, else all
// hardware threads).
void set_max_threads(int n);
int max_threads();

namespace detail {
void run_parallel(std::size_t n, void (*thunk)(void*, std::size_t), void* ctx);
}

// Runs body(0..n-1) across worker threads. Iterations must be independent:
// each index writes only to its own output slot, so results are identical
// for any thread count. Cross-slot reductions stay with the caller, which
// performs them serially in index order.
template <class F>
void parallel_for(std::size_t n, F&& body) {
    auto thunk = [](void* ctx, std::size_t i) { (*static_cast<F*>(ctx))(i); };
    detail::run_parallel(n, thunk, &body);
}

}  // namespace spectropitch
