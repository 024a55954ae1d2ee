#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "qmclab/spectrum.hpp"
#include "qmclab/trial.hpp"

using namespace qmclab;

namespace {

/// exp(lambda sum_k X_k)(|up..up> + |down..down>) built densely.
oracle::Vector brute_force_symmetric(double lambda, int L) {
    const auto n = Eigen::Index{1} << L;
    oracle::Vector ref = oracle::Vector::Zero(n);
    ref(0) = 1.0;
    ref(n - 1) = 1.0;
    return oracle::expm(lambda * oracle::sum_x(L)) * ref;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("qmclab_test_" + name);
}

}  // namespace

TEST(AmplitudeSymmetric, GhzLimit) {
    EXPECT_EQ(amplitude_symmetric(0.0, 6, SpinConfiguration::all_up(6)), 1.0);
    for (Bits x = 1; x < 63; ++x) EXPECT_EQ(amplitude_symmetric(0.0, 6, SpinConfiguration(x, 6)), 0.0);
}

TEST(AmplitudeSymmetric, ComplementSymmetry) {
    for (double lambda : {0.05, 0.127, 0.9}) {
        for (Bits x = 0; x < 256; ++x) {
            const SpinConfiguration s(x, 8);
            EXPECT_EQ(amplitude_symmetric(lambda, 8, s), amplitude_symmetric(lambda, 8, s.complement()));
        }
    }
}

TEST(AmplitudeSymmetric, SingleFlipValue) {
    const SpinConfiguration one_down(0b111110, 6);
    const double brute = brute_force_symmetric(0.127, 6)(one_down.bits);
    EXPECT_NEAR(amplitude_symmetric(0.127, 6, one_down), brute, 1e-12);
    EXPECT_NEAR(amplitude_symmetric(0.127, 6, one_down), 0.13260078233074543, 1e-12);
}

TEST(AmplitudeSymmetric, MatchesDenseExponential) {
    for (int L : {2, 4, 6, 8}) {
        for (double lambda : {0.05, 0.127, 0.5}) {
            const auto brute = brute_force_symmetric(lambda, L);
            for (Bits x = 0; x < basis_dimension(L); ++x) {
                const double got = amplitude_symmetric(lambda, L, SpinConfiguration(x, L));
                EXPECT_NEAR(got, brute(x), 1e-10 * std::abs(brute(x))) << L << " " << lambda << " " << x;
            }
        }
    }
}

TEST(SymmetricTable, NormalizedAndSymmetric) {
    for (int L : {4, 9, 12}) {
        const auto t = symmetric_exponential_table(0.3, L);
        EXPECT_NEAR(norm2(t.amplitudes()), 1.0, 1e-12);
        for (Bits x = 0; x < t.dimension(); ++x) EXPECT_EQ(t[x], t[x ^ site_mask(L)]);
        EXPECT_EQ(t.metadata()["lambda"], 0.3);
    }
}

TEST(TrialTable, RejectsWrongSizeAndZeroNorm) {
    EXPECT_THROW(TrialTable(4, std::vector<double>(8, 1.0)), format_error);
    EXPECT_THROW(TrialTable(4, std::vector<double>(16, 0.0)), std::invalid_argument);
}

TEST(VariationalEnergy, ExactGroundTrial) {
    const TfimModel m(8, 1.0, 0.7);
    const auto t = build_trial_table(ExactGroundSpec{}, m);
    EXPECT_NEAR(variational_energy(t, m), exact_ground_ed(m).ground_energy, 1e-10);
}

TEST(VariationalEnergy, GhzAtZeroField) {
    const TfimModel m(6, 1.0, 0.0);
    EXPECT_NEAR(variational_energy(symmetric_exponential_table(0.0, 6), m), -6.0, 1e-12);
}

TEST(VariationalEnergy, FixedLambdaQuality) {
    for (int L = 6; L <= 12; ++L) {
        const TfimModel m(L, 1.0, 0.5);
        const double ratio = variational_energy(symmetric_exponential_table(0.127, L), m) /
                             exact_ground_fermion(m).ground_energy;
        EXPECT_GE(ratio, 0.998) << "L=" << L;
        EXPECT_LE(ratio, 1.0);
    }
}

TEST(OptimizeLambda, ZeroFieldGivesGhz) {
    EXPECT_EQ(optimize_lambda(TfimModel(6, 1.0, 0.0)), 0.0);
}

TEST(OptimizeLambda, AgreesWithGridScan) {
    const TfimModel m(12, 1.0, 0.5);
    const double lambda = optimize_lambda(m);
    double best = 0.0;
    double best_energy = 1e300;
    for (int i = 0; i <= 2000; ++i) {
        const double l = 0.05 + 1e-4 * i;
        const double e = variational_energy(symmetric_exponential_table(l, 12), m);
        if (e < best_energy) {
            best_energy = e;
            best = l;
        }
    }
    EXPECT_NEAR(lambda, best, 1e-4);
    EXPECT_NEAR(lambda, 0.127, 0.02);
}

TEST(OptimizeLambda, LocalMinimum) {
    for (double g : {0.5, 1.0, 1.5}) {
        const TfimModel m(8, 1.0, g);
        const double lambda = optimize_lambda(m);
        const double e = variational_energy(symmetric_exponential_table(lambda, 8), m);
        EXPECT_GE(variational_energy(symmetric_exponential_table(lambda + 1e-3, 8), m), e);
        EXPECT_GE(variational_energy(symmetric_exponential_table(std::max(0.0, lambda - 1e-3), 8), m), e);
    }
}

TEST(OptimizeLambda, RejectsBadWindow) {
    const TfimModel m(4, 1.0, 1.0);
    EXPECT_THROW(optimize_lambda(m, {0.5, 0.2}), std::invalid_argument);
    EXPECT_THROW(optimize_lambda(m, {-0.1, 1.0}), std::invalid_argument);
}

TEST(BuildTrialTable, ExactGroundEqualsEdVector) {
    const TfimModel m(6, 1.0, 1.0);
    const auto t = build_trial_table(ExactGroundSpec{}, m);
    const auto ed = exact_ground_ed(m);
    for (Bits x = 0; x < t.dimension(); ++x) EXPECT_NEAR(t[x], (*ed.ground_vector)[x], 1e-14);
}

TEST(BuildTrialTable, OptimizedLambdaIsRecorded) {
    const TfimModel m(6, 1.0, 1.0);
    const auto t = build_trial_table(SymmetricExponentialSpec{}, m);
    EXPECT_EQ(t.metadata()["lambda_source"], "optimized");
    EXPECT_NEAR(t.metadata()["lambda"].get<double>(), optimize_lambda(m), 0.0);
}

TEST(FilteredTrial, ZeroTauIsIdentity) {
    const TfimModel m(8, 1.0, 1.0);
    const auto base = symmetric_exponential_table(0.2, 8);
    const auto t = build_trial_table(ImaginaryTimeFilteredSpec{SymmetricExponentialSpec{0.2}, 0.0}, m);
    for (Bits x = 0; x < t.dimension(); ++x) EXPECT_NEAR(t[x], base[x], 1e-15);
}

TEST(FilteredTrial, LongTimeReachesGroundState) {
    const TfimModel m(8, 1.0, 1.0);
    const auto t = build_trial_table(ImaginaryTimeFilteredSpec{SymmetricExponentialSpec{0.2}, 50.0}, m);
    const auto ed = exact_ground_ed(m);
    EXPECT_GT(std::abs(dot(t.amplitudes(), *ed.ground_vector)), 1.0 - 1e-8);
}

TEST(FilteredTrial, EnergyNonIncreasingInTau) {
    for (double g : {0.5, 1.0}) {
        const TfimModel m(10, 1.0, g);
        double previous = 1e300;
        for (double tau : {0.0, 0.05, 0.1, 0.5}) {
            const auto t = build_trial_table(ImaginaryTimeFilteredSpec{SymmetricExponentialSpec{0.1}, tau}, m);
            EXPECT_NEAR(norm2(t.amplitudes()), 1.0, 1e-12);
            const double e = variational_energy(t, m);
            EXPECT_LE(e, previous + 1e-12) << "tau=" << tau;
            previous = e;
        }
    }
}

TEST(FilteredTrial, CapabilityLimit) {
    const TfimModel m(13, 1.0, 1.0);
    EXPECT_THROW(build_trial_table(ImaginaryTimeFilteredSpec{SymmetricExponentialSpec{0.2}, 0.1}, m), capability_error);
}

TEST(TableFile, RoundTrip) {
    const auto path = temp_path("roundtrip.qmct");
    const auto t = symmetric_exponential_table(0.4, 5);
    write_table_file(path, t);
    ASSERT_TRUE(std::filesystem::exists(path.string() + ".json"));
    EXPECT_EQ(std::filesystem::file_size(path), 12u + 8u * 32u);
    const auto loaded = build_trial_table(TableFileSpec{path}, TfimModel(5, 1.0, 1.0));
    for (Bits x = 0; x < 32; ++x) EXPECT_EQ(loaded[x], t[x]);
    EXPECT_THROW(build_trial_table(TableFileSpec{path}, TfimModel(6, 1.0, 1.0)), format_error);
}

TEST(TableFile, LittleEndianHeader) {
    const auto path = temp_path("header.qmct");
    write_table_file(path, symmetric_exponential_table(0.1, 3));
    std::ifstream in(path, std::ios::binary);
    unsigned char head[12];
    in.read(reinterpret_cast<char*>(head), 12);
    EXPECT_EQ(std::string(reinterpret_cast<char*>(head), 4), "QMCT");
    EXPECT_EQ(head[4], 1);
    EXPECT_EQ(head[5] | head[6] | head[7], 0);
    EXPECT_EQ(head[8], 3);
}

TEST(TableFile, RejectsCorruptFiles) {
    const auto good = temp_path("good.qmct");
    write_table_file(good, symmetric_exponential_table(0.1, 3));
    std::string bytes;
    {
        std::ifstream in(good, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto write = [](const std::filesystem::path& p, const std::string& b) {
        std::ofstream(p, std::ios::binary | std::ios::trunc) << b;
    };
    const auto bad = temp_path("bad.qmct");
    write(bad, "XMCT" + bytes.substr(4));
    EXPECT_THROW(read_table_file(bad), format_error);
    write(bad, bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(read_table_file(bad), format_error);
    write(bad, bytes + "x");
    EXPECT_THROW(read_table_file(bad), format_error);
    std::string wrong_version = bytes;
    wrong_version[4] = 2;
    write(bad, wrong_version);
    EXPECT_THROW(read_table_file(bad), format_error);
    EXPECT_THROW(read_table_file(temp_path("missing.qmct")), format_error);
}
