#pragma once

#include <cstddef>
#include <functional>

namespace perfrac {

/// Worker cap: PERFRAC_THREADS if set to a positive integer, else hardware concurrency.
int worker_limit();

/// Runs fn(0..count-1) on up to worker_limit() threads. Exceptions are
/// rethrown on the caller thread (the one with the lowest index wins).
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace perfrac
