#pragma once

#include <cstdint>
#include <thread>
#include <vector>

namespace appraiser {

// Runs fn(i) for i in [0, count) across `threads` workers on contiguous
// chunks. Callers keep results deterministic by writing to index i's slot or
// by accumulating in exact integer arithmetic; this helper imposes no
// reduction order of its own.
template <typename Fn>
void parallel_for(std::int64_t count, int threads, Fn&& fn) {
    if (threads < 1) threads = 1;
    if (threads == 1 || count <= 1) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const int workers = static_cast<int>(std::min<std::int64_t>(threads, count));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::int64_t chunk = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::int64_t begin = w * chunk;
        const std::int64_t end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] {
            for (std::int64_t i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

int default_thread_count();  // APPRAISER_THREADS env var, else 1

}  // namespace appraiser
