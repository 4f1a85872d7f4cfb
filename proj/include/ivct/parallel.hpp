#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace ivct {

// Worker-thread cap: IVCT_THREADS env var, else hardware concurrency.
int max_threads();

// Static-chunk parallel for. Callers must write disjoint outputs per index so
// results are independent of the thread count.
inline void parallel_for(int64_t begin, int64_t end, const std::function<void(int64_t, int64_t)>& body) {
    const int64_t n = end - begin;
    const int nt = static_cast<int>(std::min<int64_t>(max_threads(), std::max<int64_t>(1, n)));
    if (nt <= 1) {
        body(begin, end);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(nt));
    const int64_t chunk = (n + nt - 1) / nt;
    for (int t = 0; t < nt; ++t) {
        const int64_t lo = begin + t * chunk;
        const int64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& th : threads) th.join();
}

} // namespace ivct
