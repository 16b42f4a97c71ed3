#pragma once

#include <cstddef>
#include <functional>

namespace bflow {

/// Worker count: BF_THREADS when set to a positive integer, else the
/// hardware concurrency (at least 1).
unsigned default_thread_count();

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
/// visited exactly once. If any call throws, the exception from the lowest
/// failing index is rethrown after all workers finish, so failures do not
/// depend on scheduling.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

} // namespace bflow
