#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace hyperdyn {

// Number of worker threads used by the grid sweeps. 0 means hardware
// concurrency. Results never depend on this value.
void set_thread_count(unsigned n);
unsigned thread_count();

// Calls fn(begin, end, worker) on contiguous blocks of [0, n).
template <class Fn>
void parallel_blocks(std::size_t n, Fn&& fn, unsigned threads = 0)
{
    if (threads == 0)
        threads = thread_count();
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n / 64, 1)));
    if (threads <= 1) {
        fn(std::size_t(0), n, 0u);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        std::size_t b = t * chunk, e = std::min(n, b + chunk);
        if (b >= e)
            break;
        pool.emplace_back([&fn, b, e, t] { fn(b, e, t); });
    }
    for (auto& th : pool)
        th.join();
}

template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned threads = 0)
{
    parallel_blocks(
        n, [&fn](std::size_t b, std::size_t e, unsigned) {
            for (std::size_t i = b; i < e; ++i)
                fn(i);
        },
        threads);
}

} // namespace hyperdyn
