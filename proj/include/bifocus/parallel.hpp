#ifndef BIFOCUS_PARALLEL_HPP
#define BIFOCUS_PARALLEL_HPP

#include <functional>

namespace bifocus {

/// Worker cap: BIFOCUS_THREADS when set (>= 1), else hardware concurrency
/// clamped to 8.
int worker_count();

/// Runs fn(0..n-1) across workers. Exceptions are captured and the one from
/// the lowest index is rethrown after all tasks finish, so failure behavior
/// does not depend on scheduling.
void parallel_for(int n, const std::function<void(int)>& fn);

} // namespace bifocus

#endif
