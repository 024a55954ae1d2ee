#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace qmclab {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; a bijection on 64-bit words with full avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed for cell `cell_index` of a run with master seed `master`:
///   mix64(mix64(master) + 0x9E3779B97F4A7C15 * (cell_index + 1)).
/// The golden-ratio increment is odd, so for a fixed master distinct indices never collide.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell_index) noexcept {
    return mix64(mix64(master) + 0x9E3779B97F4A7C15ULL * (cell_index + 1));
}

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Flat position of a (length, budget, replicate) cell inside one parameter grid.
struct CellKey {
    std::size_t length_index = 0;
    std::size_t budget_index = 0;
    std::size_t replicate = 0;
};

inline std::uint64_t cell_index(const CellKey& key, std::size_t n_budgets, std::size_t n_replicates) {
    return (static_cast<std::uint64_t>(key.length_index) * n_budgets + key.budget_index) * n_replicates +
           key.replicate;
}

// Per-cell substreams. The shot stream is shared by every experiment touching the same cell,
// so overlap and local-energy panels of one replicate see the same ShotCounts.
enum class Substream : std::uint64_t { shots = 0, propagation = 1, baseline_shots = 2 };

inline std::uint64_t substream_seed(std::uint64_t cell_seed, Substream stream) {
    return derive_seed(cell_seed, static_cast<std::uint64_t>(stream));
}

}  // namespace qmclab
