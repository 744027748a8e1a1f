#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace basincert {

// Runs body(i) for i in [0, count). Work items are independent and write
// only to their own slots, so results are identical for any thread count;
// reductions over the results must then happen in index order.
inline void parallel_for(long count, int threads, const std::function<void(long)>& body) {
    if (count <= 0) return;
    if (threads <= 1 || count == 1) {
        for (long i = 0; i < count; ++i) body(i);
        return;
    }
    const int nt = static_cast<int>(std::min<long>(threads, count));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nt));
    std::vector<std::exception_ptr> errors(nt);
    for (int w = 0; w < nt; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (long i = w; i < count; i += nt) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace basincert
