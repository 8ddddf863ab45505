#pragma once

#include <cstdint>
#include <functional>

namespace cobiveco::threading {

/// Number of worker threads used by parallel loops (default: hardware concurrency).
int threadCount();

/// Sets the worker count; n < 1 restores the hardware default.
void setThreadCount(int n);

/// Runs fn(i) for i in [0, n). Every index is processed exactly once and
/// writes only to its own output slots, so results are identical for any
/// thread count.
void parallelFor(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace cobiveco::threading
