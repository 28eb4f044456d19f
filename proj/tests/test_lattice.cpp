#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "kawasaki/lattice.hpp"
#include "oracles.hpp"

using namespace kawasaki;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, bool mean_zero) {
    std::normal_distribution<double> n01;
    std::vector<double> v(n);
    double s = 0.0;
    for (auto& x : v) { x = n01(rng); s += x; }
    if (mean_zero)
        for (auto& x : v) x -= s / static_cast<double>(n);
    return v;
}

// <r, (-A)^+ r> through the eigendecomposition of the dense matrix.
double dense_dual_norm(const std::vector<double>& a, const std::vector<double>& r) {
    const auto m = oracle::conductance_matrix(a);
    const auto n = static_cast<Eigen::Index>(a.size());
    Eigen::MatrixXd neg(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) neg(i, j) = -m[i][j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(neg);
    Eigen::Map<const Eigen::VectorXd> rv(r.data(), n);
    const Eigen::VectorXd c = es.eigenvectors().transpose() * rv;
    double s = 0.0;
    const double top = es.eigenvalues().maxCoeff();
    for (Eigen::Index k = 0; k < n; ++k)
        if (es.eigenvalues()[k] > 1e-10 * top) s += c[k] * c[k] / es.eigenvalues()[k];
    return s;
}

}  // namespace

TEST(Lattice, A0MatchesDenseMatrix) {
    std::mt19937_64 rng(1);
    const auto x = random_vector(13, rng, false);
    const auto m = oracle::conductance_matrix(std::vector<double>(13, 1.0));
    const auto expect = oracle::matvec(m, x);
    const auto got = apply_a0(x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-10);
}

TEST(Lattice, ConductanceMatchesDenseMatrix) {
    std::mt19937_64 rng(2);
    const auto field = ConductanceField::iid_uniform(17, 1.0, 2.0, rng);
    const auto x = random_vector(17, rng, false);
    const auto expect = oracle::matvec(oracle::conductance_matrix(field.bonds), x);
    const auto got = apply_conductance(field, x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-10);
}

TEST(Lattice, ConstantFieldReducesToA0) {
    std::mt19937_64 rng(3);
    const auto x = random_vector(10, rng, false);
    const auto a = apply_conductance(ConductanceField::constant(10), x);
    const auto b = apply_a0(x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(a[i], b[i]);
}

TEST(Lattice, StateDependentBondValues) {
    const BondFunction fn{1.0, 0.5, 1.0};
    const auto f = ConductanceField::state_dependent(fn, 4);
    const std::vector<double> x{0.0, 1.0, -1.0, 0.5};
    const auto a = f.bond_values(x);
    EXPECT_DOUBLE_EQ(a[0], 1.0 + 0.5 * std::exp(-1.0));
    EXPECT_DOUBLE_EQ(a[3], 1.0 + 0.5 * std::exp(-0.25));
    EXPECT_THROW(f.bond_values(), Error);
    EXPECT_THROW(ConductanceField::state_dependent(BondFunction{0.5, -0.6, 1.0}, 4), Error);
}

TEST(Lattice, DirichletFormIsMinusQuadraticForm) {
    std::mt19937_64 rng(4);
    const auto field = ConductanceField::iid_uniform(12, 0.5, 2.0, rng);
    const auto h = random_vector(12, rng, false);
    const auto ah = apply_conductance(field, h);
    double q = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) q -= h[i] * ah[i];
    EXPECT_NEAR(dirichlet_form(field, h, std::vector<double>(12, 1.0)), q, 1e-9 * std::abs(q));
}

TEST(Lattice, DualNormAgainstEigendecomposition) {
    std::mt19937_64 rng(6);
    for (std::size_t n : {8u, 33u, 64u}) {
        const auto field = ConductanceField::iid_uniform(n, 1.0, 2.0, rng);
        const auto r = random_vector(n, rng, true);
        const auto res = discrete_dual_norm_solve(field, r);
        EXPECT_NEAR(res.value, dense_dual_norm(field.bonds, r), 1e-9 * res.value);
        // the returned solution solves (-A) u = r
        const auto au = apply_conductance(field, res.solution);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(-au[i], r[i], 1e-8 * n * n);
    }
}

TEST(Lattice, DualNormIsSupremum) {
    std::mt19937_64 rng(8);
    const auto field = ConductanceField::iid_uniform(16, 1.0, 3.0, rng);
    const auto r = random_vector(16, rng, true);
    const double val = discrete_dual_norm(field, r);
    const std::vector<double> ones(16, 1.0);
    for (int t = 0; t < 30; ++t) {
        auto h = random_vector(16, rng, false);
        for (auto& v : h) v *= 0.01;
        double lin = 0.0;
        for (std::size_t i = 0; i < 16; ++i) lin += h[i] * r[i];
        EXPECT_LE(2.0 * lin - dirichlet_form(field, h, ones), val + 1e-12);
    }
}

TEST(Lattice, DualNormRejectsNonzeroMean) {
    try {
        discrete_dual_norm(ConductanceField::constant(4), std::vector<double>{1.0, 0.0, 0.0, 0.0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotMeanZero);
    }
}

TEST(Lattice, EmbedStepAgainstFineAverages) {
    std::mt19937_64 rng(12);
    const std::size_t n = 10;
    const auto x = random_vector(n, rng, false);
    for (std::size_t m : {5u, 7u, 20u, 23u}) {
        const auto g = embed_step(x, m);
        for (std::size_t j = 0; j < m; ++j) {
            // average of the step function over the grid cell by midpoint sampling
            const int samples = 200000;
            double s = 0.0;
            for (int q = 0; q < samples; ++q) {
                double th = (static_cast<double>(j) - 0.5 + (q + 0.5) / samples) / m;
                th -= std::floor(th);
                auto i = static_cast<std::size_t>(std::floor(th * n + 0.5)) % n;
                s += x[i];
            }
            EXPECT_NEAR(g[j], s / samples, 1e-4);
        }
        EXPECT_NEAR(g.mean(), SpinConfiguration(x).mean, 1e-12);
    }
}

TEST(Lattice, EmbedStepDoubleResolutionWeights) {
    const std::vector<double> x{1.0, 2.0, 4.0, 8.0};
    const auto g = embed_step(x, 2);
    EXPECT_NEAR(g[0], 0.25 * 8.0 + 0.5 * 1.0 + 0.25 * 2.0, 1e-14);
    EXPECT_NEAR(g[1], 0.25 * 2.0 + 0.5 * 4.0 + 0.25 * 8.0, 1e-14);
}

TEST(Lattice, LinfDistance) {
    const auto times = uniform_times(1.0, 2);
    const auto target = SpaceTimeProfile::sample(times, 32, [](double t, double th) { return t * std::sin(kTwoPi * th); });
    std::vector<GridFunction> traj(3, GridFunction(32, 0.0));
    EXPECT_NEAR(linf_hminus1_distance(traj, target), std::sqrt(1.0 / (8.0 * kPi * kPi)), 1e-12);
    traj[1][0] += 1.0;
    EXPECT_THROW(linf_hminus1_distance(traj, target), Error);
}
