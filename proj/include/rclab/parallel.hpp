#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace rclab {

/// Resolve a worker-count request: 0 means "use hardware concurrency".
inline int resolve_workers(int workers) {
    if (workers > 0) return workers;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Run fn(i) for i in [begin, end) on `workers` threads with static block
/// partitioning. Callers must write only to disjoint per-index slots; all
/// reductions happen sequentially afterwards, so results never depend on the
/// worker count.
template <typename Fn>
void parallel_for(int begin, int end, int workers, Fn&& fn) {
    const int count = end - begin;
    if (count <= 0) return;
    const int n_workers = std::min(resolve_workers(workers), count);
    if (n_workers <= 1) {
        for (int i = begin; i < end; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    const int chunk = (count + n_workers - 1) / n_workers;
    for (int w = 0; w < n_workers; ++w) {
        const int lo = begin + w * chunk;
        const int hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (int i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace rclab
