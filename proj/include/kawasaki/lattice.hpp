#pragma once

// Periodic 1-D lattice: spin configurations, conductance fields, the
// divergence-form operators A0 / A(omega) / A(x), their Dirichlet forms and
// dual norms, and the step-function embedding into torus profiles.
//
// Bond b joins sites b and b+1 (mod N); site i sits at theta = i/N.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "error.hpp"
#include "grid.hpp"
#include "sobolev.hpp"

namespace kawasaki {

struct SpinConfiguration {
    std::vector<double> values;
    double mean = 0.0;

    SpinConfiguration() = default;
    explicit SpinConfiguration(std::vector<double> v) : values(std::move(v)) { mean = empirical_mean(); }

    std::size_t n() const noexcept { return values.size(); }
    double empirical_mean() const noexcept {
        return values.empty() ? 0.0 : std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n());
    }
};

// a(x, y) = base + amplitude * exp(-(x^2 + y^2) / width^2)
struct BondFunction {
    double base = 1.0;
    double amplitude = 0.0;
    double width = 1.0;

    double value(double x, double y) const noexcept {
        return base + amplitude * std::exp(-(x * x + y * y) / (width * width));
    }
    double dx(double x, double y) const noexcept {
        return amplitude * std::exp(-(x * x + y * y) / (width * width)) * (-2.0 * x / (width * width));
    }
    double dy(double x, double y) const noexcept {
        return amplitude * std::exp(-(x * x + y * y) / (width * width)) * (-2.0 * y / (width * width));
    }
    double lower() const noexcept { return base + std::min(amplitude, 0.0); }
    double upper() const noexcept { return base + std::max(amplitude, 0.0); }
    bool is_constant() const noexcept { return amplitude == 0.0; }
};

enum class ConductanceKind { constant, iid, state_dependent };

class ConductanceField {
public:
    ConductanceKind kind = ConductanceKind::constant;
    std::vector<double> bonds;  // constant / iid: one value per bond
    BondFunction bond_fn;       // state_dependent
    double c = 1.0;             // ellipticity: 1/c <= a <= c

    static ConductanceField constant(std::size_t n, double kappa = 1.0) {
        require(kappa > 0.0, "conductance must be positive");
        ConductanceField f;
        f.kind = ConductanceKind::constant;
        f.bonds.assign(n, kappa);
        f.c = std::max(kappa, 1.0 / kappa);
        return f;
    }

    static ConductanceField from_values(std::vector<double> values, double c) {
        ConductanceField f;
        f.kind = ConductanceKind::iid;
        f.bonds = std::move(values);
        f.c = c;
        f.validate();
        return f;
    }

    template <class Rng>
    static ConductanceField iid_uniform(std::size_t n, double lo, double hi, Rng& rng) {
        require(0.0 < lo && lo <= hi, "uniform conductance law needs 0 < lo <= hi");
        std::uniform_real_distribution<double> u(lo, hi);
        std::vector<double> v(n);
        for (auto& a : v) a = u(rng);
        return from_values(std::move(v), std::max(hi, 1.0 / lo));
    }

    static ConductanceField state_dependent(const BondFunction& fn, std::size_t n) {
        require(fn.lower() > 0.0, "bond function must be bounded below by a positive constant");
        ConductanceField f;
        f.kind = ConductanceKind::state_dependent;
        f.bond_fn = fn;
        f.bonds.assign(n, 0.0);
        f.c = std::max(fn.upper(), 1.0 / fn.lower());
        return f;
    }

    std::size_t n() const noexcept { return bonds.size(); }

    void validate() const {
        if (kind == ConductanceKind::state_dependent) return;
        for (double a : bonds)
            require(a >= 1.0 / c - 1e-15 && a <= c + 1e-15, "conductance outside [1/c, c]");
    }

    // Bond values; the state-dependent kind needs the configuration x.
    std::vector<double> bond_values(std::span<const double> x = {}) const {
        if (kind != ConductanceKind::state_dependent) return bonds;
        require(x.size() == n(), "state-dependent field needs a configuration of matching size");
        std::vector<double> a(n());
        for (std::size_t b = 0; b < n(); ++b) a[b] = bond_fn.value(x[b], x[(b + 1) % n()]);
        return a;
    }
};

// (A0 x)_i = N^2 (x_{i+1} + x_{i-1} - 2 x_i)
inline std::vector<double> apply_a0(std::span<const double> x) {
    const std::size_t n = x.size();
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = n2 * (x[(i + 1) % n] + x[(i + n - 1) % n] - 2.0 * x[i]);
    return r;
}

// (A x)_i = N^2 [a_i (x_{i+1} - x_i) - a_{i-1} (x_i - x_{i-1})]
inline std::vector<double> apply_conductance(const ConductanceField& field, std::span<const double> x,
                                             std::span<const double> state = {}) {
    const std::size_t n = x.size();
    require(field.n() == n, "field and vector sizes differ");
    const auto a = field.bond_values(state);
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ip = (i + 1) % n, im = (i + n - 1) % n;
        r[i] = n2 * (a[i] * (x[ip] - x[i]) - a[im] * (x[i] - x[im]));
    }
    return r;
}

// sum_i w_i N^2 a_i (h_{i+1} - h_i)^2
inline double dirichlet_form(const ConductanceField& field, std::span<const double> h, std::span<const double> weights,
                             std::span<const double> state = {}) {
    const std::size_t n = h.size();
    require(field.n() == n && weights.size() == n, "dirichlet_form size mismatch");
    const auto a = field.bond_values(state);
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        require(weights[i] >= 0.0, "dirichlet_form weights must be nonnegative");
        const double d = h[(i + 1) % n] - h[i];
        s += weights[i] * n2 * a[i] * d * d;
    }
    return s;
}

struct DualNormResult {
    double value = 0.0;          // <u, r> = sup_h 2<h,r> - <(-A)h, h>
    std::vector<double> solution;  // mean-zero u with (-A) u = r
};

// Dual norm of a mean-zero vector for the quadratic form of -A. The periodic
// divergence-form system is integrated through its bond fluxes G_i = a_i (u_{i+1} - u_i):
// G_i = C - N^-2 sum_{j<=i} r_j, with C fixed by periodicity sum_i G_i / a_i = 0.
inline DualNormResult discrete_dual_norm_solve(const ConductanceField& field, std::span<const double> r,
                                               std::span<const double> state = {}) {
    const std::size_t n = r.size();
    require(field.n() == n, "field and vector sizes differ");
    double sum = 0.0, scale = 1.0;
    for (double v : r) { sum += v; scale = std::max(scale, std::abs(v)); }
    if (std::abs(sum) > 1e-10 * scale) fail(ErrorCode::NotMeanZero, "dual norm input sums to " + std::to_string(sum));
    const double mean = sum / static_cast<double>(n);
    const auto a = field.bond_values(state);
    const double n2 = static_cast<double>(n) * static_cast<double>(n);

    std::vector<double> partial(n);
    double acc = 0.0, inv_sum = 0.0, weighted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(a[i] > 0.0)) fail(ErrorCode::SolverSingular, "non-positive conductance");
        acc += (r[i] - mean) / n2;
        partial[i] = acc;
        inv_sum += 1.0 / a[i];
        weighted += partial[i] / a[i];
    }
    const double c0 = weighted / inv_sum;
    DualNormResult out;
    out.solution.assign(n, 0.0);
    double value = 0.0, u = 0.0, usum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = c0 - partial[i];
        value += g * g / a[i];
        out.solution[i] = u;
        usum += u;
        u += g / a[i];
    }
    for (auto& v : out.solution) v -= usum / static_cast<double>(n);
    out.value = n2 * value;
    return out;
}

inline double discrete_dual_norm(const ConductanceField& field, std::span<const double> r,
                                 std::span<const double> state = {}) {
    return discrete_dual_norm_solve(field, r, state).value;
}

// Cell averages of the step function x(theta) = x_i on the site cell
// [(i - 1/2)/N, (i + 1/2)/N) over the grid cells [(j - 1/2)/M, (j + 1/2)/M).
inline GridFunction embed_step(std::span<const double> x, std::size_t m) {
    const std::size_t n = x.size();
    require(n > 0 && m > 0, "embed_step needs non-empty sizes");
    const double nd = static_cast<double>(n);
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
    // Integral of the step function from -1/(2N) to theta.
    auto cumulative = [&](double theta) {
        const double u = theta * nd + 0.5;
        const double periods = std::floor(u / nd);
        const double rem = u - periods * nd;
        auto i = static_cast<std::size_t>(std::floor(rem));
        if (i >= n) i = n - 1;
        const double frac = rem - static_cast<double>(i);
        return (periods * prefix[n] + prefix[i] + frac * x[i]) / nd;
    };
    GridFunction g(m);
    const double md = static_cast<double>(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double lo = (static_cast<double>(j) - 0.5) / md;
        const double hi = (static_cast<double>(j) + 0.5) / md;
        g[j] = md * (cumulative(hi) - cumulative(lo));
    }
    return g;
}

inline GridFunction embed_step(const SpinConfiguration& x, std::size_t m) { return embed_step(x.values, m); }

// max over snapshot times of the H^-1 distance between traj[k] and target(t_k).
inline double linf_hminus1_distance(std::span<const GridFunction> traj, const SpaceTimeProfile& target,
                                    double mean_tol = 1e-8) {
    require(traj.size() == target.frames.size(), "trajectory and target have different time grids");
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        GridFunction d = traj[k] - target.frames[k];
        if (std::abs(d.mean()) > mean_tol)
            fail(ErrorCode::MeanMismatch, "mean differs by " + std::to_string(d.mean()) + " at snapshot " +
                                              std::to_string(k));
        worst = std::max(worst, std::sqrt(std::max(hminus1_norm(d.centered()), 0.0)));
    }
    return worst;
}

}  // namespace kawasaki
