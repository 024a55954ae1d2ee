#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "qmclab/errors.hpp"
#include "qmclab/linalg.hpp"
#include "qmclab/model.hpp"

namespace qmclab {

struct KrylovOptions {
    std::size_t max_dimension = 400;
    double tolerance = 1e-13;
};

/// Normalized e^{-tau H} v computed in a Lanczos basis with full reorthogonalization.
/// The basis grows until the projected result stops changing at working precision
/// or the Krylov space becomes invariant. tau = 0 returns v / |v| unchanged otherwise.
inline std::vector<double> imaginary_time_propagate(const TfimModel& model, std::span<const double> v, double tau,
                                                    const KrylovOptions& options = {}) {
    detail::require_dimension(model, v.size());
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw std::invalid_argument("imaginary time must be finite and >= 0");
    const double v_norm = norm2(v);
    if (!(v_norm > 0.0)) throw std::invalid_argument("cannot propagate the zero vector");

    std::vector<double> start(v.begin(), v.end());
    for (double& x : start) x /= v_norm;
    if (tau == 0.0) return start;

    const std::size_t n = model.dimension();
    const std::size_t max_dim = std::min(options.max_dimension, n);
    const double breakdown = 1e-12 * (model.length * (model.coupling + model.field) + 1.0);

    std::vector<std::vector<double>> basis;
    basis.push_back(std::move(start));
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<double> coeffs;
    std::vector<double> w(n);

    auto project = [&]() {
        const auto es = linalg::tridiagonal_eigensystem(alpha, beta);
        const std::size_t m = es.n;
        const double lowest = es.values[0];
        std::vector<double> c(m, 0.0);
        for (std::size_t k = 0; k < m; ++k) {
            const double f = std::exp(-tau * (es.values[k] - lowest)) * es.component(0, k);
            for (std::size_t i = 0; i < m; ++i) c[i] += f * es.component(i, k);
        }
        const double cn = norm2(c);
        for (double& x : c) x /= cn;
        return c;
    };

    bool converged = false;
    for (std::size_t j = 0; j < max_dim; ++j) {
        const auto& q = basis[j];
        apply_hamiltonian(model, q, w);
        const double a = dot(q, w);
        alpha.push_back(a);
        for (std::size_t i = 0; i < n; ++i) w[i] -= a * q[i];
        if (j > 0) {
            const auto& prev = basis[j - 1];
            for (std::size_t i = 0; i < n; ++i) w[i] -= beta[j - 1] * prev[i];
        }
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : basis) {
                const double overlap = dot(b, w);
                for (std::size_t i = 0; i < n; ++i) w[i] -= overlap * b[i];
            }
        }
        const double b = norm2(w);

        const std::size_t m = j + 1;
        const bool invariant = b < breakdown || m == n;
        if (invariant || m < 48 || m % 4 == 0 || m == max_dim) {
            auto next = project();
            double change = 0.0;
            for (std::size_t i = 0; i < next.size(); ++i) {
                const double old = i < coeffs.size() ? coeffs[i] : 0.0;
                change += (next[i] - old) * (next[i] - old);
            }
            coeffs = std::move(next);
            if (invariant || std::sqrt(change) < options.tolerance) {
                converged = true;
                break;
            }
        }
        beta.push_back(b);
        std::vector<double> q_next(n);
        for (std::size_t i = 0; i < n; ++i) q_next[i] = w[i] / b;
        basis.push_back(std::move(q_next));
    }
    if (!converged) throw numerical_error("Krylov propagation did not converge within the basis limit");

    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        for (std::size_t x = 0; x < n; ++x) out[x] += coeffs[i] * basis[i][x];
    }
    const double out_norm = norm2(out);
    for (double& x : out) x /= out_norm;
    return out;
}

}  // namespace qmclab
