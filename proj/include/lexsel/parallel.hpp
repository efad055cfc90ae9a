#pragma once

#include <atomic>
#include <thread>
#include <vector>

namespace lexsel {

// Runs fn(i) for i in [0, n) across worker threads and returns the results in
// index order, so reductions over the output are deterministic regardless of
// scheduling.
template <typename Fn>
auto parallel_map(size_t n, Fn&& fn) -> std::vector<decltype(fn(size_t{0}))> {
    using R = decltype(fn(size_t{0}));
    std::vector<R> results(n);
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    if (n <= 1 || workers <= 1) {
        for (size_t i = 0; i < n; ++i) results[i] = fn(i);
        return results;
    }
    std::atomic<size_t> next{0};
    auto worker = [&] {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= n) break;
            results[i] = fn(i);
        }
    };
    std::vector<std::thread> pool;
    unsigned count = std::min<size_t>(workers, n);
    pool.reserve(count);
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return results;
}

}  // namespace lexsel
