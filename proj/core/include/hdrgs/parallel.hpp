#pragma once

#include <cstddef>
#include <functional>

namespace hdrgs {

/// Worker count: HDRGS_THREADS if set and positive, else hardware concurrency.
unsigned worker_threads();

/// Runs body(i) for i in [0, count). Iterations are distributed over
/// worker_threads() threads; each index runs exactly once. Callers own
/// disjoint output slots per index, so results do not depend on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace hdrgs
