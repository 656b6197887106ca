#pragma once

#include <algorithm>
#include <exception>
#include <stdexcept>
#include <thread>
#include <vector>

namespace hsnr {

// Run fn(i) for every i in [0, count) across `threads` workers. The index
// range is split into contiguous chunks assigned by worker rank, so the set
// of indices each invocation touches is fixed up front; as long as fn(i)
// writes only to i's own output slots, results are bitwise independent of
// the worker count.
template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
    if (count <= 0) return;
    if (threads < 1) throw std::invalid_argument("parallel_for: threads must be >= 1");
    threads = std::min(threads, count);

    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }

    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const int chunk = (count + threads - 1) / threads;
    for (int rank = 0; rank < threads; ++rank) {
        const int begin = rank * chunk;
        const int end = std::min(count, begin + chunk);
        pool.emplace_back([&, rank, begin, end] {
            try {
                for (int i = begin; i < end; ++i) fn(i);
            } catch (...) {
                errors[rank] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace hsnr
