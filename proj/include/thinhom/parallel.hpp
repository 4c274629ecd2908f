#pragma once

#include <cstdint>
#include <vector>

namespace thinhom::par {

/// Set the OpenMP thread count used by the parallel kernels (no-op when
/// built without OpenMP). 0 keeps the runtime default.
void set_threads(int n);
int threads();

/// Fixed chunk size used by the deterministic reductions. Partial sums are
/// accumulated per chunk and combined in chunk order, so results are
/// bit-identical for any thread count (and identical to the serial twins).
inline constexpr std::int64_t kReductionChunk = 1024;

inline std::int64_t num_chunks(std::int64_t n) {
  return (n + kReductionChunk - 1) / kReductionChunk;
}

}  // namespace thinhom::par
