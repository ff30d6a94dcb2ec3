#pragma once

#include <cstddef>
#include <functional>

namespace vps {

/// Caps the number of worker threads used by data-parallel loops (0 = hardware default).
void set_max_jobs(unsigned jobs);
unsigned max_jobs();

/// Runs body(i) for i in [0, n). Each index is visited by exactly one thread, so
/// results written per-index are deterministic regardless of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace vps
