#pragma once

#include <lapacke.h>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmclab/errors.hpp"

namespace qmclab::linalg {

struct Eigenpair {
    double value = 0.0;
    std::vector<double> vector;
};

/// All eigenvalues ascending; vectors stored column-wise, vectors[i * n + j] is component i of pair j.
struct Eigensystem {
    std::size_t n = 0;
    std::vector<double> values;
    std::vector<double> vectors;

    double component(std::size_t i, std::size_t j) const { return vectors[i * n + j]; }
};

/// Lowest eigenpair of a dense symmetric row-major matrix (LAPACK dsyevr). Consumes the matrix.
inline Eigenpair lowest_eigenpair(std::vector<double> matrix, std::size_t n) {
    if (matrix.size() != n * n) throw std::invalid_argument("lowest_eigenpair: matrix is not n x n");
    const auto dim = static_cast<lapack_int>(n);
    lapack_int found = 0;
    std::vector<double> values(n);
    std::vector<double> vector(n);
    std::vector<lapack_int> support(2);
    const lapack_int info = LAPACKE_dsyevr(LAPACK_ROW_MAJOR, 'V', 'I', 'U', dim, matrix.data(), dim, 0.0, 0.0, 1, 1,
                                           0.0, &found, values.data(), vector.data(), 1, support.data());
    if (info != 0 || found != 1) throw numerical_error("dsyevr failed, info=" + std::to_string(info));
    return {values[0], std::move(vector)};
}

/// Full symmetric eigendecomposition (LAPACK dsyevd). Consumes the matrix.
inline Eigensystem symmetric_eigensystem(std::vector<double> matrix, std::size_t n) {
    if (matrix.size() != n * n) throw std::invalid_argument("symmetric_eigensystem: matrix is not n x n");
    std::vector<double> values(n);
    const auto dim = static_cast<lapack_int>(n);
    const lapack_int info = LAPACKE_dsyevd(LAPACK_ROW_MAJOR, 'V', 'U', dim, matrix.data(), dim, values.data());
    if (info != 0) throw numerical_error("dsyevd failed, info=" + std::to_string(info));
    return {n, std::move(values), std::move(matrix)};
}

/// Symmetric tridiagonal eigendecomposition (LAPACK dstev).
inline Eigensystem tridiagonal_eigensystem(std::vector<double> diagonal, std::vector<double> off_diagonal) {
    const std::size_t n = diagonal.size();
    if (n == 0 || off_diagonal.size() + 1 < n) throw std::invalid_argument("tridiagonal_eigensystem: bad sizes");
    off_diagonal.resize(n > 1 ? n - 1 : 1);
    std::vector<double> vectors(n * n);
    const auto dim = static_cast<lapack_int>(n);
    const lapack_int info =
        LAPACKE_dstev(LAPACK_ROW_MAJOR, 'V', dim, diagonal.data(), off_diagonal.data(), vectors.data(), dim);
    if (info != 0) throw numerical_error("dstev failed, info=" + std::to_string(info));
    return {n, std::move(diagonal), std::move(vectors)};
}

}  // namespace qmclab::linalg
