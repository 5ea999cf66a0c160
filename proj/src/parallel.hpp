#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

#include "cerec/core.hpp"

namespace cerec::detail {

// Runs body(i) for i in [0, count) over contiguous chunks. Iterations must be
// independent; the first exception thrown by any worker is rethrown.
template <class Body>
void parallel_for(Index count, unsigned threads, Body&& body) {
    const Index workers = std::clamp<Index>(static_cast<Index>(threads), 1, std::max<Index>(count, 1));
    if (workers == 1) {
        for (Index i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const Index chunk = (count + workers - 1) / workers;
    for (Index w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                const Index end = std::min(count, (w + 1) * chunk);
                for (Index i = w * chunk; i < end; ++i) body(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace cerec::detail
