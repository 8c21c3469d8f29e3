#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace sqlab {

// Runs body(i) for i in [0, count) across `threads` workers. Work is handed
// out by an atomic counter; results must be written to disjoint slots so the
// outcome does not depend on scheduling.
inline void parallel_for(long count, int threads, const std::function<void(long)>& body) {
    if (count <= 0) return;
    threads = static_cast<int>(std::max<long>(1, std::min<long>(threads, count)));
    if (threads == 1) {
        for (long i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<long> next(0);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::exception_ptr error;
    std::atomic<bool> failed(false);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const long i = next.fetch_add(1);
                if (i >= count || failed.load()) return;
                try {
                    body(i);
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failed.load()) std::rethrow_exception(error);
}

}  // namespace sqlab
