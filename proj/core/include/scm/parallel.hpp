#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace scm {

/// Runs fn(i) for i in [0, count) on up to `threads` workers (strided split).
/// The first exception thrown by any worker is rethrown after all joined.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    const std::size_t used = std::min(workers, std::max<std::size_t>(count, 1));
    if (used <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(used);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < used; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += used) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

} // namespace scm
