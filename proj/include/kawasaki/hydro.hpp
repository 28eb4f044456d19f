#pragma once

// Explicit conservative finite-difference solvers on the unit torus for
//   d_t rho = d_theta [ c (d_theta phi'(rho) + h) ],
// with c = abar (random environment) or c = ahat(rho) (non-gradient).

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "grid.hpp"
#include "potential.hpp"

namespace kawasaki {

struct HydroOptions {
    double t_end = 0.0;
    double dt = 0.0;
    std::size_t n_out = 10;  // snapshot intervals on [0, T]
    double cfl = 0.5;        // dt M^2 c phi'' <= cfl
};

namespace detail {

// Face coefficient from the two neighbouring cell values.
using FaceCoef = std::function<double(double, double)>;

inline SpaceTimeProfile solve_flux_form(const FreeEnergyTable& table, const FaceCoef& coef, const GridFunction& rho0,
                                        const SpaceTimeFn* h, const HydroOptions& opt) {
    const std::size_t m = rho0.size();
    require(m >= 3, "hydro grid needs at least 3 points");
    require(opt.t_end >= 0.0 && opt.dt > 0.0 && opt.n_out >= 1, "hydro needs T >= 0, dt > 0, n_out >= 1");
    const double md = static_cast<double>(m);
    const auto per_out = static_cast<std::size_t>(
        std::max(1.0, std::ceil(opt.t_end / (static_cast<double>(opt.n_out) * opt.dt) - 1e-9)));
    const std::size_t n_steps = per_out * opt.n_out;
    const double dt = opt.t_end / static_cast<double>(n_steps);

    SpaceTimeProfile out;
    out.times.push_back(0.0);
    out.frames.push_back(rho0);
    std::vector<double> rho(rho0.vec()), w(m), c(m), flux(m);
    for (std::size_t k = 0; k < n_steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        double stiff = 0.0;
        for (std::size_t j = 0; j < m; ++j) w[j] = table.d1(rho[j]);
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t jp = (j + 1) % m;
            c[j] = coef(rho[j], rho[jp]);
            stiff = std::max(stiff, c[j] * std::max(table.d2(rho[j]), table.d2(rho[jp])));
            double f = md * (w[jp] - w[j]);
            if (h) f += (*h)(t, (static_cast<double>(j) + 0.5) / md);
            flux[j] = c[j] * f;
        }
        if (dt * md * md * stiff > opt.cfl)
            fail(ErrorCode::CFLViolation, "dt M^2 c phi'' = " + std::to_string(dt * md * md * stiff) + " exceeds " +
                                              std::to_string(opt.cfl) + " at t=" + std::to_string(t));
        for (std::size_t j = 0; j < m; ++j) rho[j] += dt * md * (flux[j] - flux[(j + m - 1) % m]);
        if ((k + 1) % per_out == 0) {
            out.times.push_back(static_cast<double>(k + 1) * dt);
            out.frames.emplace_back(rho);
        }
    }
    return out;
}

}  // namespace detail

// d_t rho = abar d_theta^2 phi'(rho)
inline SpaceTimeProfile solve_hydro(const FreeEnergyTable& table, double abar, const GridFunction& rho0,
                                    const HydroOptions& opt) {
    require(abar > 0.0, "abar must be positive");
    return detail::solve_flux_form(table, [abar](double, double) { return abar; }, rho0, nullptr, opt);
}

// d_t rho = abar d_theta (h + d_theta phi'(rho)), h evaluated at cell faces
inline SpaceTimeProfile solve_controlled(const FreeEnergyTable& table, double abar, const GridFunction& rho0,
                                         const SpaceTimeFn& h, const HydroOptions& opt) {
    require(abar > 0.0, "abar must be positive");
    return detail::solve_flux_form(table, [abar](double, double) { return abar; }, rho0, &h, opt);
}

// d_t rho = d_theta (ahat(rho) (d_theta phi'(rho) + h)); ahat at the arithmetic face midpoint
inline SpaceTimeProfile solve_nongrad_hydro(const FreeEnergyTable& table, const std::function<double(double)>& ahat,
                                            const GridFunction& rho0, const HydroOptions& opt,
                                            const std::optional<SpaceTimeFn>& h = std::nullopt) {
    auto coef = [&ahat](double a, double b) {
        const double v = ahat(0.5 * (a + b));
        if (!(v > 0.0)) fail(ErrorCode::InvalidArgument, "ahat must be positive");
        return v;
    };
    return detail::solve_flux_form(table, coef, rho0, h ? &*h : nullptr, opt);
}

}  // namespace kawasaki
