#pragma once

#include <cstddef>
#include <functional>

namespace confsplat {

/// Worker count: CONFSPLAT_THREADS when set (>= 1), otherwise the hardware
/// concurrency. Can be overridden programmatically for tests.
unsigned worker_count();
void set_worker_count(unsigned n);  // 0 restores the environment default

/// Runs task(i) for i in [0, n) over the worker pool. Tasks must write to
/// disjoint state; results are reduced by the caller in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task);

}  // namespace confsplat
