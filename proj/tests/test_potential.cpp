#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kawasaki/grid.hpp"
#include "kawasaki/potential.hpp"
#include "oracles.hpp"

using namespace kawasaki;

namespace {

double oracle_log_z(const SingleSitePotential& pot, double sigma, double lo = -12.0, double hi = 12.0) {
    return std::log(oracle::composite_gauss([&](double x) { return std::exp(sigma * x - pot.value(x)); }, lo, hi));
}

double oracle_mean(const SingleSitePotential& pot, double sigma) {
    auto f = [&](double x) { return std::exp(sigma * x - pot.value(x)); };
    const double z = oracle::composite_gauss(f, -12.0, 12.0);
    return oracle::composite_gauss([&](double x) { return x * f(x); }, -12.0, 12.0) / z;
}

}  // namespace

TEST(Potential, EvalPsiQuartic) {
    const auto q = SingleSitePotential::quartic();
    EXPECT_DOUBLE_EQ(eval_psi(q, 1.0, 0), 0.25);
    EXPECT_DOUBLE_EQ(eval_psi(q, 1.0, 1), 1.0);
    EXPECT_DOUBLE_EQ(eval_psi(q, 1.0, 2), 3.0);
    EXPECT_DOUBLE_EQ(eval_psi(q, -2.0, 1), -8.0);
}

TEST(Potential, GeneralExponentMatchesFastPath) {
    SingleSitePotential p3(3.0);
    EXPECT_NEAR(p3.value(-1.5), std::pow(1.5, 3.0) / 3.0, 1e-15);
    EXPECT_NEAR(p3.d1(-1.5), -2.25, 1e-15);
    EXPECT_NEAR(p3.d2(-1.5), 3.0, 1e-15);
}

TEST(Potential, RejectsExponentBelowTwo) {
    EXPECT_THROW(SingleSitePotential(1.5), Error);
}

TEST(Potential, PerturbationIsC1AndBounded) {
    Perturbation dp({{-1.0, 0.0}, {0.0, 0.3}, {1.0, 0.0}});
    EXPECT_DOUBLE_EQ(dp.eval(-5.0, 0), 0.0);
    EXPECT_DOUBLE_EQ(dp.eval(5.0, 1), 0.0);
    EXPECT_NEAR(dp.eval(0.0, 0), 0.3, 1e-15);
    EXPECT_NEAR(dp.eval(-1.0 + 1e-9, 1), 0.0, 1e-7);  // clamped end
    // derivative against central differences
    for (double x : {-0.7, -0.2, 0.35, 0.9}) {
        const double fd = (dp.eval(x + 1e-6, 0) - dp.eval(x - 1e-6, 0)) / 2e-6;
        EXPECT_NEAR(dp.eval(x, 1), fd, 1e-8);
        const double fd2 = (dp.eval(x + 1e-5, 1) - dp.eval(x - 1e-5, 1)) / 2e-5;
        EXPECT_NEAR(dp.eval(x, 2), fd2, 1e-7);
    }
    EXPECT_GE(dp.bound(0), 0.3 - 1e-12);
}

TEST(Potential, GaussianLogPartitionClosedForm) {
    const auto g = SingleSitePotential::gaussian();
    for (double s : {0.0, 1.0, -2.5}) EXPECT_NEAR(log_partition(g, s), 0.5 * s * s + 0.5 * std::log(kTwoPi), 1e-12);
}

TEST(Potential, QuarticLogPartitionAgainstGaussLegendre) {
    const auto q = SingleSitePotential::quartic();
    // int exp(-x^4/4) dx = Gamma(1/4) / sqrt(2)
    EXPECT_NEAR(log_partition(q, 0.0), std::log(std::tgamma(0.25) / std::sqrt(2.0)), 1e-12);
    for (double s : {0.0, 0.7, -1.3, 3.0}) EXPECT_NEAR(log_partition(q, s), oracle_log_z(q, s), 1e-11);
}

TEST(Potential, PerturbedLogPartitionAgainstGaussLegendre) {
    SingleSitePotential p(2.0, Perturbation({{-1.0, 0.0}, {-0.2, 0.5}, {0.4, -0.3}, {1.2, 0.0}}));
    for (double s : {0.0, 0.9, -1.7}) EXPECT_NEAR(log_partition(p, s), oracle_log_z(p, s), 1e-11);
}

TEST(Potential, TailNotNegligible) {
    SingleSitePotential q(4.0, {}, 0.5);
    try {
        log_partition(q, 0.0);
        FAIL() << "expected TailNotNegligible";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TailNotNegligible);
    }
}

TEST(FreeEnergy, GaussianClosedForm) {
    const auto t = build_free_energy(SingleSitePotential::gaussian(), -3.0, 3.0, 121);
    for (double y = -3.0; y <= 3.0; y += 0.0137) {
        EXPECT_NEAR(t.value(y), 0.5 * y * y - 0.5 * std::log(kTwoPi), 1e-8);
        EXPECT_NEAR(t.d1(y), y, 1e-8);
        EXPECT_NEAR(t.d2(y), 1.0, 1e-8);
    }
}

TEST(FreeEnergy, QuarticSlopeAgainstGridSupremum) {
    const auto q = SingleSitePotential::quartic();
    const auto t = build_free_energy(q, -2.0, 2.0, 161);
    // phi'(1) is the maximiser of sigma - Lambda(sigma); coarse scan then fine scan.
    auto objective = [&](double s) { return s - oracle_log_z(q, s); };
    double best = -3.0, best_val = objective(best);
    for (double s = -3.0; s <= 3.0; s += 0.01)
        if (const double v = objective(s); v > best_val) { best_val = v; best = s; }
    const double centre = best;
    for (double s = centre - 0.02; s <= centre + 0.02; s += 1e-5)
        if (const double v = objective(s); v > best_val) { best_val = v; best = s; }
    EXPECT_NEAR(t.d1(1.0), best, 2e-5);
    EXPECT_NEAR(t.value(1.0), best_val, 1e-9);
}

TEST(FreeEnergy, QuarticConvexAndDual) {
    const auto q = SingleSitePotential::quartic();
    const auto t = build_free_energy(q, -2.0, 2.0, 161);
    for (std::size_t i = 0; i < t.y_grid.size(); ++i) {
        EXPECT_GT(t.phi_second[i], 0.0);
        EXPECT_DOUBLE_EQ(t.phi_prime[i], t.sigma_of_y[i]);
    }
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.9, 1.9);
    for (int k = 0; k < 20; ++k) {
        const double y = u(rng);
        const double sigma = t.d1(y);
        EXPECT_NEAR(oracle_mean(q, sigma), y, 1e-8);
        // phi(y) + Lambda(phi'(y)) = y phi'(y)
        EXPECT_NEAR(t.value(y) + oracle_log_z(q, sigma), y * sigma, 1e-8 * std::max(1.0, std::abs(y * sigma)));
    }
    EXPECT_THROW(t.value(2.5), Error);
}

TEST(FreeEnergy, OutOfRangeCode) {
    const auto t = build_free_energy(SingleSitePotential::gaussian(), -1.0, 1.0, 11);
    try {
        t.d1(1.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OutOfTableRange);
    }
}

TEST(Sampler, GaussianMoments) {
    const auto g = SingleSitePotential::gaussian();
    std::mt19937_64 rng(11);
    for (double lambda : {0.0, 1.5}) {
        SingleSiteSampler s(g, lambda);
        double m = 0.0, v = 0.0;
        const int n = 400000;
        for (int k = 0; k < n; ++k) {
            const double x = s(rng);
            m += x;
            v += x * x;
        }
        m /= n;
        v = v / n - m * m;
        EXPECT_NEAR(m, lambda, 0.006);
        EXPECT_NEAR(v, 1.0, 0.01);
        EXPECT_NEAR(s.table_mean(), lambda, 1e-5);
    }
}

TEST(Sampler, QuarticTiltedMean) {
    const auto q = SingleSitePotential::quartic();
    const double lambda = solve_tilt(q, 0.7, 0.3);
    SingleSiteSampler s(q, lambda);
    std::mt19937_64 rng(3);
    double m = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) m += s(rng);
    EXPECT_NEAR(m / n, 0.7, 0.006);
}

TEST(Cramer, GaussianClosedForm) {
    const auto g = SingleSitePotential::gaussian();
    const std::vector<double> ms{-1.0, -0.5, 0.0, 0.5, 1.0};
    for (int k : {2, 8}) {
        const auto r = cramer_compare(g, k, ms);
        for (std::size_t i = 0; i < ms.size(); ++i) {
            const double m = ms[i];
            EXPECT_NEAR(r.psi_k[i], 0.5 * m * m - 0.5 * std::log(kTwoPi) + std::log(kTwoPi * k) / (2.0 * k), 1e-6);
        }
        EXPECT_NEAR(r.max_deviation, std::log(kTwoPi * k) / (2.0 * k), 1e-6);
    }
    EXPECT_LT(cramer_compare(g, 8, ms).max_deviation, cramer_compare(g, 2, ms).max_deviation);
}

TEST(Cramer, QuarticAgainstDirectQuadrature) {
    const auto q = SingleSitePotential::quartic();
    const int k = 3;
    const std::vector<double> ms{0.0, 0.6};
    const auto r = cramer_compare(q, k, ms);
    // -(1/3) log int int exp(-psi(x1) - psi(x2) - psi(3m - x1 - x2)) dx1 dx2
    for (std::size_t i = 0; i < ms.size(); ++i) {
        const double s = k * ms[i];
        const double inner_val = oracle::composite_gauss(
            [&](double x1) {
                return oracle::composite_gauss(
                    [&](double x2) { return std::exp(-q.value(x1) - q.value(x2) - q.value(s - x1 - x2)); }, -7.0, 7.0,
                    1e-13);
            },
            -7.0, 7.0, 1e-13);
        EXPECT_NEAR(r.psi_k[i], -std::log(inner_val) / k, 1e-7);
    }
}

TEST(Cramer, QuarticDeviationShrinks) {
    const auto q = SingleSitePotential::quartic();
    const std::vector<double> ms{-1.0, -0.5, 0.0, 0.5, 1.0};
    const auto r2 = cramer_compare(q, 2, ms);
    const auto r8 = cramer_compare(q, 8, ms);
    EXPECT_LT(r8.max_deviation, r2.max_deviation);
    EXPECT_LT(r8.richardson_error, 1e-8);
}
