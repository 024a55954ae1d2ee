#pragma once

#include <bit>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmclab/spin.hpp"

namespace qmclab {

/// Periodic 1D transverse-field Ising chain,
/// H = -J sum_k z_k z_{k+1} - Gamma sum_k x_k with site L wrapping to site 0.
struct TfimModel {
    int length = 2;
    double coupling = 1.0;  // J
    double field = 0.0;     // Gamma

    TfimModel(int sites, double j, double gamma) : length(sites), coupling(j), field(gamma) {
        if (sites < 2 || sites > max_encodable_sites) {
            throw std::invalid_argument("TfimModel: L must lie in [2, 62], got " + std::to_string(sites));
        }
        if (!(j >= 0.0) || !std::isfinite(j)) throw std::invalid_argument("TfimModel: J must be finite and >= 0");
        if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
            throw std::invalid_argument("TfimModel: Gamma must be finite and >= 0");
        }
    }

    std::size_t dimension() const noexcept { return basis_dimension(length); }
    Bits mask() const noexcept { return site_mask(length); }
};

namespace detail {

inline void require_sites(const TfimModel& model, const SpinConfiguration& x) {
    if (x.sites != model.length) {
        throw std::invalid_argument("configuration has " + std::to_string(x.sites) + " sites, model has " +
                                    std::to_string(model.length));
    }
}

inline void require_dimension(const TfimModel& model, std::size_t size) {
    if (size != model.dimension()) {
        throw std::invalid_argument("vector length " + std::to_string(size) + " does not match 2^L = " +
                                    std::to_string(model.dimension()));
    }
}

}  // namespace detail

/// Number of antiparallel bonds, wraparound bond included.
inline int domain_walls(const TfimModel& model, Bits x) noexcept {
    const int L = model.length;
    const Bits rotated = (x >> 1) | ((x & 1U) << (L - 1));
    return std::popcount((x ^ rotated) & model.mask());
}

/// Unchecked diagonal element for hot loops.
inline double diagonal_energy(const TfimModel& model, Bits x) noexcept {
    return -model.coupling * static_cast<double>(model.length - 2 * domain_walls(model, x));
}

inline double diagonal_energy(const TfimModel& model, const SpinConfiguration& x) {
    detail::require_sites(model, x);
    return diagonal_energy(model, x.bits);
}

/// Largest diagonal element over the basis: every bond frustrated for even L,
/// one bond necessarily satisfied for odd L.
inline double max_diagonal_energy(const TfimModel& model) noexcept {
    const int walls = model.length % 2 == 0 ? model.length : model.length - 1;
    return -model.coupling * static_cast<double>(model.length - 2 * walls);
}

/// The L single-flip states connected to x, ordered by flipped site.
/// Each carries off-diagonal element -Gamma.
inline std::vector<SpinConfiguration> neighbors(const TfimModel& model, const SpinConfiguration& x) {
    detail::require_sites(model, x);
    std::vector<SpinConfiguration> out;
    out.reserve(static_cast<std::size_t>(model.length));
    for (int k = 0; k < model.length; ++k) out.push_back(x.flipped(k));
    return out;
}

inline void apply_hamiltonian(const TfimModel& model, std::span<const double> v, std::span<double> out) {
    detail::require_dimension(model, v.size());
    detail::require_dimension(model, out.size());
    if (v.data() == out.data()) throw std::invalid_argument("apply_hamiltonian: input and output alias");
    const std::size_t n = model.dimension();
    for (std::size_t x = 0; x < n; ++x) {
        double flips = 0.0;
        for (int k = 0; k < model.length; ++k) flips += v[x ^ (std::size_t{1} << k)];
        out[x] = diagonal_energy(model, static_cast<Bits>(x)) * v[x] - model.field * flips;
    }
}

inline std::vector<double> apply_hamiltonian(const TfimModel& model, std::span<const double> v) {
    std::vector<double> out(v.size());
    apply_hamiltonian(model, v, out);
    return out;
}

/// Row-major dense matrix of H. Memory grows as 4^L.
inline std::vector<double> dense_hamiltonian(const TfimModel& model) {
    const std::size_t n = model.dimension();
    std::vector<double> h(n * n, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
        h[x * n + x] = diagonal_energy(model, static_cast<Bits>(x));
        for (int k = 0; k < model.length; ++k) h[x * n + (x ^ (std::size_t{1} << k))] = -model.field;
    }
    return h;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace qmclab
