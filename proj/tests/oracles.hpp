#pragma once

// Reference constructions that share no code with the library: dense Pauli-string
// Hamiltonians, a Taylor matrix exponential and small statistics helpers.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix pauli_x() { return (Matrix(2, 2) << 0, 1, 1, 0).finished(); }
// Index 0 is a down spin, index 1 an up spin.
inline Matrix pauli_z() { return (Matrix(2, 2) << -1, 0, 0, 1).finished(); }

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Tensor product with `op` on `site` and identities elsewhere; site k is bit k.
inline Matrix on_site(const Matrix& op, int site, int length) {
    Matrix out = Matrix::Identity(1, 1);
    for (int k = length - 1; k >= 0; --k) out = kron(out, k == site ? op : Matrix::Identity(2, 2));
    return out;
}

inline Matrix tfim(int length, double J, double gamma) {
    const auto n = Eigen::Index{1} << length;
    Matrix h = Matrix::Zero(n, n);
    for (int k = 0; k < length; ++k) {
        h -= J * on_site(pauli_z(), k, length) * on_site(pauli_z(), (k + 1) % length, length);
        h -= gamma * on_site(pauli_x(), k, length);
    }
    return h;
}

inline Matrix sum_x(int length) {
    const auto n = Eigen::Index{1} << length;
    Matrix s = Matrix::Zero(n, n);
    for (int k = 0; k < length; ++k) s += on_site(pauli_x(), k, length);
    return s;
}

/// exp(a) by scaling and squaring around a truncated Taylor series.
inline Matrix expm(const Matrix& a) {
    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    while (norm / std::ldexp(1.0, squarings) > 0.25) ++squarings;
    const Matrix scaled = a / std::ldexp(1.0, squarings);
    Matrix term = Matrix::Identity(a.rows(), a.cols());
    Matrix sum = term;
    for (int k = 1; k <= 30; ++k) {
        term = term * scaled / static_cast<double>(k);
        sum += term;
    }
    for (int s = 0; s < squarings; ++s) sum = sum * sum;
    return sum;
}

inline double ground_energy(const Matrix& h) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(h, Eigen::EigenvaluesOnly);
    return solver.eigenvalues()(0);
}

inline Vector ground_vector(const Matrix& h) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
    Vector v = solver.eigenvectors().col(0);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    return v(arg) < 0 ? Vector(-v) : v;
}

inline Vector to_eigen(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

/// Kendall rank correlation (tau-a) between two equally long sequences.
inline double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
    long concordant = 0;
    long discordant = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const double s = (a[i] - a[j]) * (b[i] - b[j]);
            if (s > 0) ++concordant;
            if (s < 0) ++discordant;
        }
    }
    const double pairs = 0.5 * static_cast<double>(a.size()) * static_cast<double>(a.size() - 1);
    return static_cast<double>(concordant - discordant) / pairs;
}

inline double binomial_sigma(double n, double p) { return std::sqrt(n * p * (1.0 - p)); }

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<double> v(n);
    for (auto& x : v) x = normal(rng);
    return v;
}

}  // namespace oracle
