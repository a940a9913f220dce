#pragma once

#include <cstddef>
#include <functional>

namespace bico {

// Worker count: BICO_NUM_THREADS when set (>= 1), else hardware concurrency.
std::size_t thread_budget();

// Runs body(i) for i in [0, n) across up to thread_budget() threads. Callers
// must write results into per-index slots so the outcome is order independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace bico
