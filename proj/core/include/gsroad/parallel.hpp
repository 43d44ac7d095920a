#pragma once

#include <cstddef>
#include <functional>

namespace gsroad {

/// Caps the number of worker threads used by every parallel section. 0 selects
/// std::thread::hardware_concurrency().
void set_thread_count(int threads);
int thread_count();

/// Runs fn(i) for i in [0, n). Work items are claimed dynamically, so callers must make
/// each item write only to its own output slot; results are then independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace gsroad
