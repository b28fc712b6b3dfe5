#pragma once

#include <cstddef>
#include <functional>

namespace softgrasp {

/// Worker count for element and node loops: SOFTGRASP_THREADS if set (>= 1), otherwise the
/// hardware concurrency. Deterministic mode forces 1.
std::size_t worker_count();
void set_deterministic(bool on);
bool deterministic();

/// Runs body(begin, end) over contiguous chunks of [0, n). Each index is visited exactly once.
/// Callers write per-index results into disjoint slots and reduce sequentially afterwards, so the
/// outcome never depends on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace softgrasp
