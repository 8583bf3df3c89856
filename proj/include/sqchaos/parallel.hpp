// Deterministic fan-out of independent tasks over a fixed worker count.
#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace sqchaos {

/// Evaluates fn(i) for i in [0, n) and returns the results in index order.
/// Indices are split into contiguous blocks, one per worker. The first
/// exception thrown by any task (lowest index) is rethrown after all workers
/// have joined.
template <class Result, class Fn>
std::vector<Result> parallel_map(std::size_t n, int workers, Fn&& fn) {
    std::vector<Result> out(n);
    std::vector<std::exception_ptr> errors(n);
    const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n));

    auto run_block = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    if (w <= 1) {
        run_block(0, n);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(w);
        const std::size_t chunk = (n + w - 1) / w;
        for (std::size_t b = 0; b < w; ++b) {
            const std::size_t begin = b * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(run_block, begin, end);
        }
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

} // namespace sqchaos
