#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace iklflow {

/// Worker-thread cap: IKLFLOW_THREADS env var, default 1.
inline int worker_threads() {
    static const int n = [] {
        if (const char *env = std::getenv("IKLFLOW_THREADS")) {
            const int v = std::atoi(env);
            if (v >= 1) { return v; }
        }
        return 1;
    }();
    return n;
}

/// Runs fn(i) for i in [0, n). Each index is handled entirely by one
/// thread, so per-index results are bitwise independent of the thread
/// count as long as fn(i) only writes to slot i.
inline void parallel_for(long n, const std::function<void(long)> &fn) {
    const int threads = worker_threads();
    if (threads <= 1 || n < 2) {
        for (long i = 0; i < n; ++i) { fn(i); }
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([t, threads, n, &fn] {
            for (long i = t; i < n; i += threads) { fn(i); }
        });
    }
    for (auto &th : pool) { th.join(); }
}

}  // namespace iklflow
