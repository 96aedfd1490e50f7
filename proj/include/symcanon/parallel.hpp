#pragma once

#include <cstddef>
#include <functional>

namespace symcanon {

// Runs fn(0) .. fn(n-1) on up to `jobs` threads. Callers write results into
// per-index slots, so the outcome does not depend on scheduling. If any call
// throws, the exception from the lowest index is rethrown after all finish.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace symcanon
