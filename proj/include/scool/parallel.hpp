#pragma once

#include <cstddef>
#include <functional>

namespace scool {

// Worker count: SCOOL_THREADS when set to a positive integer, otherwise the
// hardware concurrency.
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker, so
// callers writing only to slot i stay deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace scool
