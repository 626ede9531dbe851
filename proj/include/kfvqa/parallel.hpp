#pragma once

#include <cstddef>
#include <functional>

namespace kfvqa {

// Runs `fn(i)` for every index with at most `jobs` worker threads.
// Exceptions are captured and rethrown (first one wins).
void parallel_for_samples(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace kfvqa
