#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace rsctl {

struct ExecOptions {
    int threads = 1;

    static ExecOptions hardware() {
        return {static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))};
    }
};

/// Runs fn(k) for k in [0, count) over contiguous chunks. fn must only write
/// to slot k of its outputs; results then do not depend on the thread count.
template <class Fn>
void parallel_for(std::size_t count, const ExecOptions& exec, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, exec.threads));
    if (workers == 1 || count < 2) {
        for (std::size_t k = 0; k < count; ++k) fn(k);
        return;
    }
    const std::size_t used = std::min(workers, count);
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < used; ++w) {
        const std::size_t begin = count * w / used;
        const std::size_t end = count * (w + 1) / used;
        pool.emplace_back([&, begin, end] {
            try {
                for (std::size_t k = begin; k < end; ++k) fn(k);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Fixed-topology pairwise summation.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace rsctl
