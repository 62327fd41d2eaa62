#pragma once

#include <cstdint>
#include <exception>
#include <thread>
#include <utility>
#include <vector>

namespace detsift {

/// 0 means auto (logical CPU count).
inline int resolve_workers(int workers) {
    if (workers > 0) return workers;
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Runs fn(begin, end) over contiguous chunks of [0, n). Every element is
/// processed exactly once regardless of worker count; callers must write
/// results to per-element slots so output is independent of scheduling.
template <typename Fn>
void parallel_for(int64_t n, int workers, Fn&& fn) {
    workers = resolve_workers(workers);
    if (n <= 0) return;
    if (workers > n) workers = static_cast<int>(n);
    if (workers <= 1) {
        fn(int64_t{0}, n);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    std::vector<std::exception_ptr> errors(workers);
    const int64_t chunk = (n + workers - 1) / workers;
    for (int w = 1; w < workers; ++w) {
        const int64_t begin = w * chunk;
        const int64_t end = std::min<int64_t>(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&fn, &errors, w, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    try {
        fn(int64_t{0}, std::min<int64_t>(n, chunk));
    } catch (...) {
        errors[0] = std::current_exception();
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detsift
