#pragma once

#include <cstdint>
#include <functional>

namespace tw {

// 0 or negative -> hardware concurrency.
int resolve_threads(int requested);

// Splits [0, total) into contiguous chunks, one per worker. Bodies must
// write only to disjoint slots; any reduction over the results has to be
// done by the caller in index order so the outcome does not depend on the
// thread count.
void parallel_for(std::int64_t total, int threads,
                  const std::function<void(std::int64_t begin, std::int64_t end)>& body);

}  // namespace tw
