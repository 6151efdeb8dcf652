#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace slqi {

/// Worker count: SLQI_THREADS env var if set, else hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("SLQI_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

/// Data-parallel map over [0, n). `fn(i)` must only touch state owned by
/// index i; results land in caller-preallocated slots so ordering is
/// deterministic regardless of scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const int workers = std::min<std::size_t>(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
                fn(i);
        });
    for (std::thread& t : pool) t.join();
}

}  // namespace slqi
