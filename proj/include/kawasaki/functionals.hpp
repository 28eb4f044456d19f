#pragma once

// Macroscopic free energy, the two rate functionals, entropy production of
// local Gibbs states, and the duality lower bound on the microscopic slope.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dynamics.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "hydro.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "potential.hpp"
#include "sobolev.hpp"

namespace kawasaki {

struct RateReport {
    double initial_term = 0.0;
    double kinetic_term = 0.0;
    double total = 0.0;
    std::vector<double> per_time;  // kinetic integrand at each time node
};

// int phi(rho) - phi(int rho); periodic trapezoid
inline double macro_free_energy(const FreeEnergyTable& table, const GridFunction& rho) {
    double s = 0.0;
    for (double v : rho.values()) s += table.value(v);
    return s / static_cast<double>(rho.size()) - table.value(rho.mean());
}

// int phi(rho0) - phi(m0) - phi'(m0) (rho0 - m0)
inline double initial_term(const FreeEnergyTable& table, const GridFunction& rho0, const GridFunction& m0) {
    require(rho0.size() == m0.size(), "initial_term grid mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < rho0.size(); ++j)
        s += table.value(rho0[j]) - table.value(m0[j]) - table.d1(m0[j]) * (rho0[j] - m0[j]);
    return s / static_cast<double>(rho0.size());
}

// d rho / dt on the stored time grid: central differences inside, second-order
// one-sided differences at the two ends.
inline std::vector<GridFunction> time_derivative(const SpaceTimeProfile& rho) {
    const std::size_t nt = rho.n_times();
    require(nt >= 2, "time derivative needs at least two time nodes");
    const std::size_t m = rho.m_grid();
    std::vector<GridFunction> d(nt, GridFunction(m));
    const auto& t = rho.times;
    for (std::size_t k = 0; k < nt; ++k) {
        for (std::size_t j = 0; j < m; ++j) {
            if (nt == 2) {
                d[k][j] = (rho.frames[1][j] - rho.frames[0][j]) / (t[1] - t[0]);
            } else if (k == 0) {
                const double h1 = t[1] - t[0], h2 = t[2] - t[1];
                const double f0 = rho.frames[0][j], f1 = rho.frames[1][j], f2 = rho.frames[2][j];
                d[k][j] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * f0 + (h1 + h2) / (h1 * h2) * f1 - h1 / (h2 * (h1 + h2)) * f2;
            } else if (k == nt - 1) {
                const double h1 = t[k - 1] - t[k - 2], h2 = t[k] - t[k - 1];
                const double f0 = rho.frames[k - 2][j], f1 = rho.frames[k - 1][j], f2 = rho.frames[k][j];
                d[k][j] = h2 / (h1 * (h1 + h2)) * f0 - (h1 + h2) / (h1 * h2) * f1 + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * f2;
            } else {
                d[k][j] = (rho.frames[k + 1][j] - rho.frames[k - 1][j]) / (t[k + 1] - t[k - 1]);
            }
        }
    }
    return d;
}

namespace detail {

inline GridFunction mean_zero_projection(const GridFunction& u) { return u.centered(); }

inline RateReport finish_rate(const FreeEnergyTable& table, const GridFunction& m0, const SpaceTimeProfile& rho,
                              std::vector<double> per_time) {
    RateReport r;
    r.initial_term = initial_term(table, rho.frames.front(), m0);
    r.kinetic_term = trapezoid(rho.times, per_time);
    r.per_time = std::move(per_time);
    r.total = r.initial_term + r.kinetic_term;
    return r;
}

inline GridFunction map_values(const GridFunction& u, const std::function<double(double)>& f) {
    GridFunction r(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) r[j] = f(u[j]);
    return r;
}

}  // namespace detail

// I(rho) = initial term + (1/4 abar) int || d_t rho - abar d^2 phi'(rho) ||^2_{H^-1} dt
inline RateReport rate_random_env(const FreeEnergyTable& table, double abar, const GridFunction& m0,
                                  const SpaceTimeProfile& rho) {
    require(abar > 0.0, "abar must be positive");
    require(rho.m_grid() == m0.size(), "m0 and profile grids differ");
    const auto rho_t = time_derivative(rho);
    std::vector<double> per_time;
    for (std::size_t k = 0; k < rho.n_times(); ++k) {
        const auto w = detail::map_values(rho.frames[k], [&](double v) { return table.d1(v); });
        const auto lap = spectral_derivative(spectral_derivative(w));
        const auto resid = detail::mean_zero_projection(rho_t[k] - lap * abar);
        per_time.push_back(hminus1_norm(resid) / (4.0 * abar));
    }
    return detail::finish_rate(table, m0, rho, std::move(per_time));
}

// Same with residual d_t rho - d(ahat(rho) d phi'(rho)) in the ahat(rho)-weighted dual norm.
inline RateReport rate_nongradient(const FreeEnergyTable& table, const std::function<double(double)>& ahat,
                                   const GridFunction& m0, const SpaceTimeProfile& rho) {
    require(rho.m_grid() == m0.size(), "m0 and profile grids differ");
    const auto rho_t = time_derivative(rho);
    std::vector<double> per_time;
    for (std::size_t k = 0; k < rho.n_times(); ++k) {
        const auto w = detail::map_values(rho.frames[k], [&](double v) { return table.d1(v); });
        const auto a = detail::map_values(rho.frames[k], ahat);
        auto flux = spectral_derivative(w);
        for (std::size_t j = 0; j < flux.size(); ++j) flux[j] *= a[j];
        const auto resid = detail::mean_zero_projection(rho_t[k] - spectral_derivative(flux));
        per_time.push_back(weighted_hminus1_norm(resid, a) / 4.0);
    }
    return detail::finish_rate(table, m0, rho, std::move(per_time));
}

struct GirsanovCheck {
    double lhs = 0.0;  // 1/2 int int abar h^2 (h projected to spatial mean zero)
    double rhs = 0.0;  // 2 x kinetic term of the controlled flow
    double reldiff = 0.0;
};

// Compares the control cost with the kinetic rate of the flow it drives.
inline GirsanovCheck girsanov_identity_check(const SpaceTimeFn& h, double abar, const FreeEnergyTable& table,
                                             const GridFunction& rho0, const HydroOptions& opt) {
    const auto rho = solve_controlled(table, abar, rho0, h, opt);
    const std::size_t m = rho0.size();
    std::vector<double> h2;
    for (double t : rho.times) {
        const auto hk = GridFunction::sample(m, [&](double th) { return h(t, th); }).centered();
        double s = 0.0;
        for (double v : hk.values()) s += v * v;
        h2.push_back(0.5 * abar * s / static_cast<double>(m));
    }
    GirsanovCheck c;
    c.lhs = trapezoid(rho.times, h2);
    c.rhs = 2.0 * rate_random_env(table, abar, rho0, rho).kinetic_term;
    // absolute floor so round-off on a zero control does not read as a 100% mismatch
    const double scale = std::max({std::abs(c.lhs), std::abs(c.rhs), 1e-14});
    c.reldiff = std::abs(c.lhs - c.rhs) / scale;
    return c;
}

struct MCEstimate {
    double value = 0.0;
    double se = 0.0;
};

// (1/N) int <A(x) v, v> dnu with v = grad log(dnu/dx) + grad H for the local
// Gibbs state nu of rho; v_i = (phi'(rho_i) - psi'(x_i)) + psi'(x_i).
inline MCEstimate fisher_mc(const SingleSitePotential& pot, const FreeEnergyTable& table,
                            const std::function<double(double)>& rho, const ConductanceField& field, std::size_t samples,
                            Rng& rng, double max_rel_se = 0.05) {
    const std::size_t n = field.n();
    require(samples >= 2, "fisher_mc needs at least two samples");
    const LocalGibbs nu(pot, table, rho, n);
    const auto& lam = nu.lambdas();
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    std::vector<double> vals(samples), sq(samples), v(n);
    for (std::size_t s = 0; s < samples; ++s) {
        const auto x = nu(rng);
        for (std::size_t i = 0; i < n; ++i) {
            const double dpsi = pot.d1(x.values[i]);
            v[i] = (lam[i] - dpsi) + dpsi;
        }
        const auto a = field.bond_values(x.values);
        double q = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            const double d = v[(b + 1) % n] - v[b];
            q += n2 * a[b] * d * d;
        }
        vals[s] = q / static_cast<double>(n);
        sq[s] = vals[s] * vals[s];
    }
    const double mean = pairwise_sum(vals) / static_cast<double>(samples);
    const double var = std::max(pairwise_sum(sq) / static_cast<double>(samples) - mean * mean, 0.0);
    MCEstimate e{mean, std::sqrt(var / static_cast<double>(samples - 1))};
    if (e.se > max_rel_se * std::abs(e.value) && e.se > 1e-12)
        fail(ErrorCode::MCVarianceTooHigh, "fisher_mc relative standard error " + std::to_string(e.se / std::abs(e.value)));
    return e;
}

// Test function J(t, theta) with its time derivative, read as V(t, x) = sum_i c_i(t) x_i.
struct SlopeTestFn {
    SpaceTimeFn j;
    SpaceTimeFn dj_dt;
};

namespace detail {

// Site coefficients of V at time t. With the corrector the bond differences of
// c are (J_{b+1} - J_b) abar / a_b, made periodic by removing their mean.
inline std::vector<double> slope_coefficients(const SpaceTimeFn& j, double t, std::size_t n,
                                              const std::vector<double>* bonds, double abar_v) {
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = j(t, static_cast<double>(i) / static_cast<double>(n));
    if (!bonds) return c;
    std::vector<double> d(n);
    double mean = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        d[b] = (c[(b + 1) % n] - c[b]) * abar_v / (*bonds)[b];
        mean += d[b] / static_cast<double>(n);
    }
    std::vector<double> out(n);
    out[0] = c[0];
    for (std::size_t i = 1; i < n; ++i) out[i] = out[i - 1] + d[i - 1] - mean;
    return out;
}

struct SlopeTerms {
    std::vector<double> ell;  // per test function: E V(T) - E V(0) - int E d_t V
    std::vector<double> q;    // Gram matrix of int E <A grad V_k, grad V_l>
    std::size_t k = 0;
};

inline SlopeTerms slope_terms(const std::vector<Trajectory>& ens, const std::vector<SlopeTestFn>& fns,
                              const ConductanceField& field, bool corrector) {
    require(!ens.empty() && !fns.empty(), "slope bound needs an ensemble and test functions");
    const auto& times = ens.front().times;
    const std::size_t nt = times.size(), n = field.n(), k = fns.size(), r = ens.size();
    require(nt >= 2, "slope bound needs at least two snapshots");
    const bool quenched = field.kind != ConductanceKind::state_dependent;
    require(!corrector || quenched, "the corrector needs a quenched field");
    const double abar_v = quenched ? abar(field.bonds) : 1.0;
    const std::vector<double>* bonds = corrector ? &field.bonds : nullptr;
    const double n2 = static_cast<double>(n) * static_cast<double>(n);

    auto ens_mean = [&](auto&& per_replica) {
        std::vector<double> v(r);
        for (std::size_t i = 0; i < r; ++i) v[i] = per_replica(ens[i]);
        return pairwise_sum(v) / static_cast<double>(r);
    };
    auto dot = [](const std::vector<double>& c, const std::vector<double>& x) {
        double s = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) s += c[i] * x[i];
        return s;
    };

    SlopeTerms out;
    out.k = k;
    out.ell.assign(k, 0.0);
    out.q.assign(k * k, 0.0);
    std::vector<std::vector<double>> dt_term(k, std::vector<double>(nt)), gram(k * k, std::vector<double>(nt));
    for (std::size_t s = 0; s < nt; ++s) {
        const double t = times[s];
        std::vector<std::vector<double>> c(k), cdot(k);
        for (std::size_t a = 0; a < k; ++a) {
            c[a] = slope_coefficients(fns[a].j, t, n, bonds, abar_v);
            cdot[a] = slope_coefficients(fns[a].dj_dt, t, n, bonds, abar_v);
            dt_term[a][s] = ens_mean([&](const Trajectory& tr) { return dot(cdot[a], tr.states[s].values); });
            if (s == 0) out.ell[a] -= ens_mean([&](const Trajectory& tr) { return dot(c[a], tr.states[0].values); });
            if (s == nt - 1) out.ell[a] += ens_mean([&](const Trajectory& tr) { return dot(c[a], tr.states[s].values); });
        }
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = a; b < k; ++b) {
                auto form = [&](const std::vector<double>& bond_a) {
                    double q = 0.0;
                    for (std::size_t e = 0; e < n; ++e)
                        q += n2 * bond_a[e] * (c[a][(e + 1) % n] - c[a][e]) * (c[b][(e + 1) % n] - c[b][e]);
                    return q;
                };
                const double v = quenched ? form(field.bonds)
                                          : ens_mean([&](const Trajectory& tr) {
                                                return form(field.bond_values(tr.states[s].values));
                                            });
                gram[a * k + b][s] = v;
                gram[b * k + a][s] = v;
            }
    }
    for (std::size_t a = 0; a < k; ++a) {
        out.ell[a] -= trapezoid(times, dt_term[a]);
        for (std::size_t b = 0; b < k; ++b) out.q[a * k + b] = trapezoid(times, gram[a * k + b]);
    }
    return out;
}

}  // namespace detail

// max over the supplied V of [2 E V(T) - 2 E V(0) - 2 int E d_t V - int E <A grad V, grad V>] / N
inline double slope_lower_bound(const std::vector<Trajectory>& ens, const std::vector<SlopeTestFn>& fns,
                                const ConductanceField& field, bool corrector = false) {
    const auto terms = detail::slope_terms(ens, fns, field, corrector);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < terms.k; ++a) best = std::max(best, 2.0 * terms.ell[a] - terms.q[a * terms.k + a]);
    return best / static_cast<double>(field.n());
}

// Supremum over the linear span of the test functions: ell^T Q^+ ell / N.
inline double slope_lower_bound_span(const std::vector<Trajectory>& ens, const std::vector<SlopeTestFn>& fns,
                                     const ConductanceField& field, bool corrector = false) {
    const auto terms = detail::slope_terms(ens, fns, field, corrector);
    const auto k = static_cast<Eigen::Index>(terms.k);
    Eigen::MatrixXd q(k, k);
    Eigen::VectorXd ell(k);
    for (Eigen::Index a = 0; a < k; ++a) {
        ell[a] = terms.ell[static_cast<std::size_t>(a)];
        for (Eigen::Index b = 0; b < k; ++b) q(a, b) = terms.q[static_cast<std::size_t>(a * k + b)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
    const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
    const Eigen::VectorXd c = es.eigenvectors().transpose() * ell;
    double s = 0.0;
    for (Eigen::Index i = 0; i < k; ++i)
        if (es.eigenvalues()[i] > 1e-12 * top) s += c[i] * c[i] / es.eigenvalues()[i];
    return s / static_cast<double>(field.n());
}

}  // namespace kawasaki
