#pragma once

#include <cstddef>
#include <functional>

namespace mbwish {

/// Runs body(0..count-1) on up to `workers` threads (0 = hardware concurrency).
/// Every index runs exactly once, even when some throw. Afterwards the exception
/// from the lowest failing index is rethrown.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body);

std::size_t resolve_workers(std::size_t requested);

}  // namespace mbwish
