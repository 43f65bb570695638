#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace sqh {

// Number of workers used when a caller passes 0.
inline unsigned default_workers()
{
    const unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : h;
}

// Runs body(i) for i in [0, n) over contiguous chunks.  Bodies must write only
// to slots owned by i; results are then independent of the worker count.
template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& body)
{
    if (workers == 0) workers = default_workers();
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace sqh
