#include "tw/parallel.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace tw {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

void parallel_for(std::int64_t total, int threads,
                  const std::function<void(std::int64_t, std::int64_t)>& body) {
    if (total <= 0) return;
    int n = std::min<std::int64_t>(resolve_threads(threads), total);
    if (n <= 1) {
        body(0, total);
        return;
    }
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    const std::int64_t chunk = (total + n - 1) / n;
    for (int t = 0; t < n; ++t) {
        const std::int64_t begin = t * chunk;
        const std::int64_t end = std::min(total, begin + chunk);
        if (begin >= end) break;
        workers.emplace_back([&, t, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace tw
