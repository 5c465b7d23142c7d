#pragma once

#include <cstddef>
#include <functional>

namespace riskgrad {

// Worker cap: RISKGRAD_THREADS if set, otherwise hardware concurrency.
int thread_budget();

// Runs fn(i) for i in [0, n). Work items must be independent; results keyed
// by i so the outcome does not depend on the number of workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace riskgrad
