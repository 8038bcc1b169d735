#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hyperscore::detail {

inline unsigned default_threads() noexcept {
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Splits [0, count) into contiguous chunks and runs fn(lo, hi) on up to
/// `threads` workers. Runs inline when one worker suffices. The first
/// exception thrown by any worker is rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, std::size_t grain, Fn&& fn) {
    if (count == 0) return;
    grain = std::max<std::size_t>(grain, 1);
    const std::size_t chunks = (count + grain - 1) / grain;
    const std::size_t workers = std::min<std::size_t>(std::max(threads, 1u), chunks);
    if (workers <= 1) {
        fn(std::size_t{0}, count);
        return;
    }

    std::mutex mu;
    std::size_t next_chunk = 0;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            std::size_t chunk;
            {
                std::lock_guard lock(mu);
                if (next_chunk == chunks || failure) return;
                chunk = next_chunk++;
            }
            const std::size_t lo = chunk * grain;
            const std::size_t hi = std::min(count, lo + grain);
            try {
                fn(lo, hi);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

} // namespace hyperscore::detail
