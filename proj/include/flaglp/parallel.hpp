#pragma once

#include <cstddef>
#include <functional>

namespace flaglp {

/// Worker count used by per-channel loops. Defaults to FLAGLP_JOBS when set,
/// otherwise std::thread::hardware_concurrency().
int worker_count();
void set_worker_count(int jobs);

/// Runs body(i) for i in [0, count) across worker_count() threads. Exceptions
/// thrown by any iteration are rethrown on the calling thread.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace flaglp
