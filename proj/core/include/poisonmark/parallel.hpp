#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace poisonmark {

// Process-wide default worker count for parallel loops (CLI --threads).
std::size_t default_thread_count();
void set_default_thread_count(std::size_t n);

// Runs fn(begin, end) over disjoint chunks of [0, n). Callers get
// determinism by writing only to their own index range. threads == 0 uses
// the process default.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    if (threads == 0) threads = default_thread_count();
    if (threads <= 1 || n < 2) {
        fn(std::size_t{0}, n);
        return;
    }
    threads = std::min(threads, n);
    const std::size_t chunk = (n + threads - 1) / threads;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(begin + chunk, n);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace poisonmark
