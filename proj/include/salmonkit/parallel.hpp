#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace salmon {

// Runs fn(0..count-1) on up to `workers` threads. Callers keep determinism
// by writing results into preallocated, index-addressed slots.
template <typename Fn>
void parallel_for(int workers, std::size_t count, Fn&& fn) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto body = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count)
                return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    int n = std::min<int>(workers, static_cast<int>(count));
    pool.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t)
        pool.emplace_back(body);
    for (auto& th : pool)
        th.join();
}

} // namespace salmon
