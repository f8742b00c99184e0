#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "error.hpp"

namespace vortexiter {

// requested > 0 wins; then VORTEXITER_THREADS; then the hardware count.
inline int resolve_threads(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("VORTEXITER_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return int(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Run body(i) for i in [0, n) over contiguous blocks. Callers write results to
// slot i and reduce afterwards in index order, so output does not depend on the thread count.
template <class Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
    const std::size_t nt = std::min<std::size_t>(std::max(1, threads), std::max<std::size_t>(1, n));
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(nt);
    const std::size_t chunk = (n + nt - 1) / nt;
    for (std::size_t b = 0; b < nt; ++b) {
        const std::size_t lo = b * chunk, hi = std::min(n, lo + chunk);
        pool.emplace_back([&, b, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                errors[b] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace vortexiter
