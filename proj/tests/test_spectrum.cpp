#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "qmclab/krylov.hpp"
#include "qmclab/spectrum.hpp"

using namespace qmclab;

TEST(ExactGroundEd, TwoSiteClassicalLimit) {
    EXPECT_NEAR(exact_ground_ed(TfimModel(2, 1.0, 0.0)).ground_energy, -2.0, 1e-12);
}

TEST(ExactGroundEd, MatchesPauliStringDiagonalization) {
    for (int L : {3, 4, 6, 8}) {
        for (double g : {0.3, 1.0, 1.7}) {
            const auto reference = oracle::ground_energy(oracle::tfim(L, 1.0, g));
            EXPECT_NEAR(exact_ground_ed(TfimModel(L, 1.0, g)).ground_energy, reference, 1e-10) << L << " " << g;
        }
    }
}

TEST(ExactGroundEd, EigenResidual) {
    const TfimModel m(10, 1.0, 1.0);
    const auto r = exact_ground_ed(m);
    ASSERT_TRUE(r.ground_vector);
    const auto& v = *r.ground_vector;
    EXPECT_NEAR(norm2(v), 1.0, 1e-12);
    const auto hv = apply_hamiltonian(m, v);
    double residual = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) residual += std::pow(hv[i] - r.ground_energy * v[i], 2);
    EXPECT_LT(std::sqrt(residual), 1e-9);
}

TEST(ExactGroundEd, PositiveGroundVectorWithField) {
    for (int L : {4, 7, 10}) {
        const auto r = exact_ground_ed(TfimModel(L, 1.0, 0.5));
        EXPECT_GT(*std::min_element(r.ground_vector->begin(), r.ground_vector->end()), 0.0);
    }
}

TEST(ExactGroundEd, CapabilityLimit) {
    EXPECT_THROW(exact_ground_ed(TfimModel(13, 1.0, 1.0)), capability_error);
    EdOptions tight;
    tight.default_max_sites = 6;
    EXPECT_THROW(exact_ground_ed(TfimModel(7, 1.0, 1.0), tight), capability_error);
    tight.allow_large = true;
    tight.hard_max_sites = 7;
    EXPECT_NO_THROW(exact_ground_ed(TfimModel(7, 1.0, 1.0), tight));
}

TEST(ExactGroundFermion, Limits) {
    for (int L : {3, 6, 11, 40}) {
        EXPECT_NEAR(exact_ground_fermion(TfimModel(L, 1.0, 0.0)).ground_energy, -1.0 * L, 1e-12);
        EXPECT_NEAR(exact_ground_fermion(TfimModel(L, 0.0, 0.7)).ground_energy, -0.7 * L, 1e-12);
    }
}

TEST(ExactGroundFermion, AgreesWithEd) {
    for (int L = 2; L <= 12; ++L) {
        for (double g : {0.25, 0.5, 1.0, 2.0}) {
            const TfimModel m(L, 1.0, g);
            EXPECT_NEAR(exact_ground_fermion(m).ground_energy, exact_ground_ed(m).ground_energy, 1e-9)
                << "L=" << L << " gamma=" << g;
        }
    }
}

TEST(ExactGroundFermion, AgreesWithEdAtLargestSizes) {
    EdOptions large;
    large.allow_large = true;
    for (int L : {13, 14}) {
        const TfimModel m(L, 1.0, 0.8);
        EXPECT_NEAR(exact_ground_fermion(m).ground_energy, exact_ground_ed(m, large).ground_energy, 1e-9);
    }
}

TEST(SpectrumResult, JsonShape) {
    const TfimModel m(6, 1.0, 1.0);
    const auto j = to_json(m, exact_ground_fermion(m));
    EXPECT_EQ(j["method"], "fermion");
    EXPECT_EQ(j["L"], 6);
    EXPECT_EQ(j["J"], 1.0);
    EXPECT_EQ(j["gamma"], 1.0);
    EXPECT_NEAR(j["energy"].get<double>(), -7.727406610312546, 1e-12);
}

class KrylovPropagation : public ::testing::TestWithParam<std::tuple<int, double>> {};

TEST_P(KrylovPropagation, MatchesDenseExponential) {
    const auto [L, tau] = GetParam();
    const TfimModel m(L, 1.0, 0.9);
    const auto v = oracle::random_vector(m.dimension(), 7 * L);
    const auto got = imaginary_time_propagate(m, v, tau);
    Eigen::SelfAdjointEigenSolver<oracle::Matrix> solver(oracle::tfim(L, 1.0, 0.9));
    const oracle::Vector shifted = (-(solver.eigenvalues().array() - solver.eigenvalues()(0)) * tau).exp();
    oracle::Vector expected = solver.eigenvectors() * shifted.asDiagonal() * solver.eigenvectors().transpose() *
                              oracle::to_eigen(v);
    expected.normalize();
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(got[i], expected(i), 1e-10) << "i=" << i;
}

INSTANTIATE_TEST_SUITE_P(Grid, KrylovPropagation,
                         ::testing::Combine(::testing::Values(2, 4, 6, 8), ::testing::Values(0.0, 0.05, 0.5, 3.0, 50.0)));

TEST(Krylov, RejectsBadInput) {
    const TfimModel m(4, 1.0, 1.0);
    std::vector<double> zero(16, 0.0);
    std::vector<double> one(16, 1.0);
    EXPECT_THROW(imaginary_time_propagate(m, zero, 0.1), std::invalid_argument);
    EXPECT_THROW(imaginary_time_propagate(m, one, -0.1), std::invalid_argument);
    EXPECT_THROW(imaginary_time_propagate(m, std::span<const double>(one.data(), 8), 0.1), std::invalid_argument);
}
