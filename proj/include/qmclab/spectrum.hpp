#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmclab/errors.hpp"
#include "qmclab/linalg.hpp"
#include "qmclab/model.hpp"

namespace qmclab {

enum class SpectrumMethod { ed, fermion };

inline std::string to_string(SpectrumMethod method) { return method == SpectrumMethod::ed ? "ed" : "fermion"; }

struct SpectrumResult {
    double ground_energy = 0.0;
    std::optional<std::vector<double>> ground_vector;
    SpectrumMethod method = SpectrumMethod::ed;
};

/// Dense diagonalization limits. L up to 12 by default; 13 and 14 need allow_large.
struct EdOptions {
    int default_max_sites = 12;
    int hard_max_sites = 14;
    bool allow_large = false;

    int max_sites() const noexcept { return allow_large ? hard_max_sites : default_max_sites; }
};

/// Flips the global sign so the largest-magnitude entry is positive. Earliest index wins ties.
inline void fix_global_sign(std::vector<double>& v) {
    if (v.empty()) return;
    const auto it = std::max_element(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    if (*it < 0.0) {
        for (double& x : v) x = -x;
    }
}

inline void require_ed_capability(const TfimModel& model, const EdOptions& options) {
    if (model.length > options.max_sites()) {
        throw capability_error("dense diagonalization limited to L <= " + std::to_string(options.max_sites()) +
                               " (requested L = " + std::to_string(model.length) + ")");
    }
}

namespace detail {

/// Orbits of the basis under cyclic translations and the global spin flip.
struct SymmetricSector {
    std::vector<std::uint32_t> orbit_of;  // basis state -> orbit index
    std::vector<double> orbit_size;
};

inline SymmetricSector symmetric_sector(int length) {
    const Bits mask = site_mask(length);
    const std::size_t n = basis_dimension(length);
    SymmetricSector sector;
    sector.orbit_of.assign(n, 0);
    std::vector<std::uint32_t> index_of_rep(n, std::numeric_limits<std::uint32_t>::max());
    for (Bits x = 0; x < n; ++x) {
        Bits rep = x;
        Bits y = x;
        for (int r = 0; r < length; ++r) {
            y = ((y << 1) | (y >> (length - 1))) & mask;
            rep = std::min({rep, y, y ^ mask});
        }
        if (index_of_rep[rep] == std::numeric_limits<std::uint32_t>::max()) {
            index_of_rep[rep] = static_cast<std::uint32_t>(sector.orbit_size.size());
            sector.orbit_size.push_back(0.0);
        }
        sector.orbit_of[x] = index_of_rep[rep];
        sector.orbit_size[index_of_rep[rep]] += 1.0;
    }
    return sector;
}

}  // namespace detail

/// Dense diagonalization inside the sector symmetric under translations and the global spin
/// flip. H is stoquastic for J, Gamma >= 0, so a nonnegative ground state exists; its
/// symmetrization is nonzero and stays in this sector, hence the sector minimum is E_0.
inline SpectrumResult exact_ground_ed(const TfimModel& model, const EdOptions& options = {}) {
    require_ed_capability(model, options);
    const auto sector = detail::symmetric_sector(model.length);
    const std::size_t d = sector.orbit_size.size();
    std::vector<double> h(d * d, 0.0);
    for (Bits y = 0; y < model.dimension(); ++y) {
        const std::size_t s = sector.orbit_of[y];
        h[s * d + s] += diagonal_energy(model, y);
        for (int k = 0; k < model.length; ++k) h[sector.orbit_of[y ^ (Bits{1} << k)] * d + s] -= model.field;
    }
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t s = 0; s < d; ++s) h[r * d + s] /= std::sqrt(sector.orbit_size[r] * sector.orbit_size[s]);

    const auto pair = linalg::lowest_eigenpair(std::move(h), d);
    std::vector<double> v(model.dimension());
    for (Bits x = 0; x < v.size(); ++x) {
        const auto r = sector.orbit_of[x];
        v[x] = pair.vector[r] / std::sqrt(sector.orbit_size[r]);
    }
    const double n = norm2(v);
    for (double& x : v) x /= n;
    fix_global_sign(v);
    return {pair.value, std::move(v), SpectrumMethod::ed};
}

/// Closed-form ground energy from the free-fermion solution in the antiperiodic sector:
/// E0 = -1/2 sum_n eps(k_n), eps(k) = 2 sqrt(J^2 + Gamma^2 - 2 J Gamma cos k), k_n = pi (2n + 1) / L.
inline SpectrumResult exact_ground_fermion(const TfimModel& model) {
    const double j = model.coupling;
    const double g = model.field;
    double sum = 0.0;
    for (int n = 0; n < model.length; ++n) {
        const double k = std::numbers::pi * (2.0 * n + 1.0) / model.length;
        sum += 2.0 * std::sqrt(std::max(0.0, j * j + g * g - 2.0 * j * g * std::cos(k)));
    }
    return {-0.5 * sum, std::nullopt, SpectrumMethod::fermion};
}

inline nlohmann::json to_json(const TfimModel& model, const SpectrumResult& result) {
    return {{"method", to_string(result.method)},
            {"L", model.length},
            {"J", model.coupling},
            {"gamma", model.field},
            {"energy", result.ground_energy}};
}

}  // namespace qmclab
