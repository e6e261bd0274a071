#pragma once

#include <cstddef>
#include <functional>

namespace evc {

// Worker cap from EVCASIMIR_THREADS (default 1).
int thread_cap();
void set_thread_cap(int n);

// Runs fn(i) for i in [0, n). Each index writes only its own output slot,
// so results do not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace evc
