#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace qmclab {

using Bits = std::uint64_t;

/// Largest chain the bitmask encoding supports.
inline constexpr int max_encodable_sites = 62;

constexpr Bits site_mask(int sites) noexcept { return (Bits{1} << sites) - 1; }

constexpr std::size_t basis_dimension(int sites) noexcept { return std::size_t{1} << sites; }

/// Computational basis state of the chain. Bit k set means spin up at site k.
struct SpinConfiguration {
    Bits bits = 0;
    int sites = 2;

    constexpr SpinConfiguration() = default;

    constexpr SpinConfiguration(Bits state, int length) : bits(state), sites(length) {
        if (length < 2 || length > max_encodable_sites) {
            throw std::invalid_argument("SpinConfiguration: chain length must lie in [2, 62], got " +
                                        std::to_string(length));
        }
        if (state > site_mask(length)) {
            throw std::invalid_argument("SpinConfiguration: bits exceed 2^L - 1");
        }
    }

    static constexpr SpinConfiguration all_up(int length) { return {site_mask(length), length}; }
    static constexpr SpinConfiguration all_down(int length) { return {0, length}; }

    constexpr bool is_up(int site) const noexcept { return ((bits >> site) & 1U) != 0; }
    constexpr int up_count() const noexcept { return std::popcount(bits); }
    constexpr int down_count() const noexcept { return sites - up_count(); }

    constexpr SpinConfiguration flipped(int site) const { return {bits ^ (Bits{1} << site), sites}; }
    constexpr SpinConfiguration complement() const { return {bits ^ site_mask(sites), sites}; }

    friend constexpr bool operator==(const SpinConfiguration&, const SpinConfiguration&) = default;
};

}  // namespace qmclab
