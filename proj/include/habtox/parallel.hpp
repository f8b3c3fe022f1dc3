#pragma once

#include <cstddef>
#include <functional>

namespace habtox {

// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). Callers write results by index, so output never depends on the
// schedule. The first exception thrown by any body is rethrown after all
// workers finish.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

// Process-wide default used when a caller passes threads = 0 through config.
std::size_t default_threads() noexcept;
void set_default_threads(std::size_t threads) noexcept;

}  // namespace habtox
