#pragma once

#include <cstdint>
#include <functional>

namespace gssdf {

/// Number of worker threads used by parallel_for. Defaults to the hardware
/// concurrency; override via set_num_threads (0 restores the default).
int num_threads();
void set_num_threads(int n);

/// Runs fn(begin, end) over fixed-size chunks of [0, n). The chunk partition
/// depends only on n and grain, never on the thread count, so per-chunk
/// results merged in chunk order are reproducible across machines and
/// thread settings.
void parallel_chunks(int64_t n, int64_t grain,
                     const std::function<void(int64_t, int64_t, int)>& fn);

/// Element-wise parallel loop, deterministic partition as above.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

/// Number of accumulation slots handed to parallel_chunks callbacks.
int parallel_slot_count();

}  // namespace gssdf
