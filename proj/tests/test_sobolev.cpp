#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kawasaki/sobolev.hpp"

using namespace kawasaki;

TEST(HMinus1, SingleModeValue) {
    for (std::size_t m : {16u, 64u, 65u}) {
        const auto u = GridFunction::sample(m, [](double th) { return std::sin(kTwoPi * th); });
        EXPECT_NEAR(hminus1_norm(u), 1.0 / (8.0 * kPi * kPi), 1e-12) << m;
    }
}

TEST(HMinus1, HigherModesScale) {
    const auto u = GridFunction::sample(64, [](double th) { return std::cos(kTwoPi * 3.0 * th) + 0.5 * std::sin(kTwoPi * 5.0 * th); });
    const double expect = 0.5 / std::pow(kTwoPi * 3.0, 2) + 0.125 / std::pow(kTwoPi * 5.0, 2);
    EXPECT_NEAR(hminus1_norm(u), expect, 1e-13);
}

TEST(HMinus1, RoutesAgreeOnRandomInput) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    for (std::size_t m : {32u, 33u, 128u}) {
        GridFunction u(m);
        for (std::size_t j = 0; j < m; ++j) u[j] = n01(rng);
        u = u.centered();
        const auto op = SpectralOperator::get(m);
        const double a = op->hminus1_by_solve(u.vec());
        const double b = op->hminus1_by_fourier(u.vec());
        EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, a));
        EXPECT_NO_THROW(hminus1_norm(u));
    }
}

TEST(HMinus1, RejectsNonzeroMean) {
    const auto u = GridFunction::sample(16, [](double th) { return 1.0 + std::sin(kTwoPi * th); });
    try {
        hminus1_norm(u);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotMeanZero);
    }
}

TEST(HMinus1, WeightedConstantReduces) {
    const auto u = GridFunction::sample(48, [](double th) { return std::sin(kTwoPi * th) - 0.3 * std::cos(kTwoPi * 4.0 * th); });
    const GridFunction w(48, 1.0 / std::log(2.0));
    EXPECT_NEAR(weighted_hminus1_norm(u, w), hminus1_norm(u) * std::log(2.0), 1e-12);
}

TEST(HMinus1, WeightedIsAntitone) {
    const auto u = GridFunction::sample(40, [](double th) { return std::sin(kTwoPi * th) + 0.2 * std::sin(kTwoPi * 2.0 * th); });
    const auto w1 = GridFunction::sample(40, [](double th) { return 1.2 + 0.5 * std::cos(kTwoPi * th); });
    const auto w2 = w1 + GridFunction(40, 0.3);
    EXPECT_GT(weighted_hminus1_norm(u, w1), weighted_hminus1_norm(u, w2));
    EXPECT_THROW(weighted_hminus1_norm(u, GridFunction(40, 0.0)), Error);
}

TEST(HMinus1, WeightedVariationalCharacterisation) {
    // the sup of 2<u,v> - <w v', v'> is attained; random trial functions stay below
    const std::size_t m = 24;
    const auto u = GridFunction::sample(m, [](double th) { return std::cos(kTwoPi * th); });
    const auto w = GridFunction::sample(m, [](double th) { return 1.5 + std::sin(kTwoPi * th); });
    const double val = weighted_hminus1_norm(u, w);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(m);
        for (std::size_t k = 1; k <= 4; ++k) {
            const double a = n01(rng) * 0.05, b = n01(rng) * 0.05;
            for (std::size_t j = 0; j < m; ++j) {
                const double th = static_cast<double>(j) / m;
                v[j] += a * std::cos(kTwoPi * k * th) + b * std::sin(kTwoPi * k * th);
            }
        }
        const auto dv = SpectralOperator::get(m)->derivative(v);
        double lin = 0.0, quad = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            lin += u[j] * v[j] / m;
            quad += w[j] * dv[j] * dv[j] / m;
        }
        EXPECT_LE(2.0 * lin - quad, val + 1e-12);
    }
}

TEST(Spectral, DerivativeExactOnTrigPolynomials) {
    const auto u = GridFunction::sample(31, [](double th) { return std::sin(kTwoPi * 2.0 * th); });
    const auto d = spectral_derivative(u);
    for (std::size_t j = 0; j < 31; ++j) EXPECT_NEAR(d[j], 2.0 * kTwoPi * std::cos(kTwoPi * 2.0 * u.theta(j)), 1e-10);
}
