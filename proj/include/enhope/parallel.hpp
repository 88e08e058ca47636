#pragma once

#include <cstddef>

namespace enhope {

/// Selects between the OpenMP kernels and their single-threaded reference
/// versions. Both produce identical results up to floating-point reassociation.
enum class Backend { serial, parallel };

namespace parallel {

/// Rows per work unit. Reductions are always formed per chunk and combined
/// in chunk order, so results do not depend on the thread count.
inline constexpr std::size_t kChunkRows = 256;

inline std::size_t chunk_count(std::size_t rows) {
    return (rows + kChunkRows - 1) / kChunkRows;
}

/// Thread count used by parallel kernels: ENHOPE_THREADS if set, otherwise
/// the OpenMP default.
int thread_count();

/// Override the thread count for the rest of the process (0 restores default).
void set_thread_count(int threads);

} // namespace parallel
} // namespace enhope
