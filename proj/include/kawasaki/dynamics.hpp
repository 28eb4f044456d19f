#pragma once

// Euler-Maruyama integrators for the conservative spin dynamics on the
// periodic lattice. Every model is written through bond fluxes:
//   flux_b = drift_b dt + c_b dt + N sqrt(2 dt a_b) eta_b,   dX_i = flux_i - flux_{i-1},
// so the increments sum to zero up to rounding. The noise draws eta_0..eta_{N-1}
// happen in the same order for every model, which makes the reductions between
// models exact given a shared stream.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "grid.hpp"
#include "homogenize.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "potential.hpp"
#include "random.hpp"

namespace kawasaki {

enum class ModelKind { classical, random_env, nongradient };

inline const char* model_name(ModelKind k) {
    switch (k) {
        case ModelKind::classical: return "classical";
        case ModelKind::random_env: return "random_env";
        default: return "nongradient";
    }
}

struct ModelSpec {
    ModelKind kind = ModelKind::classical;
    SingleSitePotential pot;
    ConductanceField field;  // unused for classical
    std::size_t n = 0;
    std::optional<SpaceTimeFn> tilt;  // control h(t, theta)
    CylinderFn cylinder;              // nongradient tilt corrector
    double c_stab = 0.1;
    double blowup = 1e3;

    static ModelSpec classical(SingleSitePotential pot, std::size_t n) {
        ModelSpec m;
        m.kind = ModelKind::classical;
        m.pot = std::move(pot);
        m.n = n;
        m.field = ConductanceField::constant(n);
        return m;
    }
    static ModelSpec random_env(SingleSitePotential pot, ConductanceField field) {
        ModelSpec m;
        m.kind = ModelKind::random_env;
        m.pot = std::move(pot);
        m.n = field.n();
        m.field = std::move(field);
        return m;
    }
    static ModelSpec nongradient(SingleSitePotential pot, const BondFunction& fn, std::size_t n) {
        ModelSpec m;
        m.kind = ModelKind::nongradient;
        m.pot = std::move(pot);
        m.n = n;
        m.field = ConductanceField::state_dependent(fn, n);
        return m;
    }

    void validate() const {
        require(n >= 2, "lattice needs at least two sites");
        require(field.n() == n, "conductance field size differs from n");
        const bool sd = field.kind == ConductanceKind::state_dependent;
        require(sd == (kind == ModelKind::nongradient), "conductance kind does not match the model kind");
        field.validate();
        cylinder.validate();
    }

    // Harmonic mean of the quenched bonds (1 for the classical model).
    double abar_value() const {
        if (kind == ModelKind::classical) return 1.0;
        require(kind == ModelKind::random_env, "abar is defined for quenched fields only");
        return abar(field.bonds);
    }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<SpinConfiguration> states;
    std::uint64_t seed = 0;
    double girsanov_cost = 0.0;   // sum over steps of 1/2 sum_b c_b^2 / (N^2 a_b) dt
    double log_lr = 0.0;          // log dQ/dP of the controlled path, dynamic part
    double log_lr_initial = 0.0;  // log density ratio of the initial law (if set)

    double max_mean_drift() const {
        double worst = 0.0;
        for (const auto& s : states) worst = std::max(worst, std::abs(s.empirical_mean() - states.front().empirical_mean()));
        return worst;
    }
};

// Per-site sampler of the local Gibbs state x_i ~ mu^{phi'(rho0(i/N))}.
class LocalGibbs {
public:
    LocalGibbs(const SingleSitePotential& pot, const FreeEnergyTable& table, const std::function<double(double)>& rho0,
               std::size_t n)
        : gaussian_(pot.is_gaussian()), lambda_(n), target_mean_(0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            const double rho = rho0(static_cast<double>(i) / static_cast<double>(n));
            lambda_[i] = table.d1(rho);
            target_mean_ += rho / static_cast<double>(n);
        }
        if (!gaussian_) {
            samplers_.reserve(n);
            for (std::size_t i = 0; i < n; ++i) samplers_.emplace_back(pot, lambda_[i]);
        }
    }

    const std::vector<double>& lambdas() const noexcept { return lambda_; }
    double target_mean() const noexcept { return target_mean_; }
    bool gaussian() const noexcept { return gaussian_; }

    SpinConfiguration operator()(Rng& rng) const {
        std::vector<double> x(lambda_.size());
        std::normal_distribution<double> n01;
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = gaussian_ ? lambda_[i] + n01(rng) : samplers_[i](rng);
        return SpinConfiguration(std::move(x));
    }

    // Gaussian case only: the product law conditioned on the mean being
    // `mean`, which is exactly x - xbar + mean.
    SpinConfiguration conditioned(Rng& rng, double mean) const {
        require(gaussian_, "hyperplane conditioning is exact only for the Gaussian potential");
        auto s = (*this)(rng);
        const double xbar = s.empirical_mean();
        for (auto& v : s.values) v += mean - xbar;
        s.mean = mean;
        return s;
    }

private:
    bool gaussian_;
    std::vector<double> lambda_;
    double target_mean_;
    std::vector<SingleSiteSampler> samplers_;
};

inline SpinConfiguration init_local_gibbs(const SingleSitePotential& pot, const FreeEnergyTable& table,
                                          const GridFunction& rho0, std::size_t n, Rng& rng) {
    require(n > 0, "init_local_gibbs needs n > 0");
    const std::size_t m = rho0.size();
    // rho0 is read at the sites through linear interpolation on its grid
    auto rho = [&](double th) {
        const double u = th * static_cast<double>(m);
        const long j = static_cast<long>(std::floor(u));
        const double s = u - static_cast<double>(j);
        return (1.0 - s) * rho0.at(j) + s * rho0.at(j + 1);
    };
    return LocalGibbs(pot, table, rho, n)(rng);
}

struct StepWork {
    std::vector<double> a, psi1, flux, c, eta;
};

namespace detail {

inline void fill_bonds(const ModelSpec& model, std::span<const double> x, StepWork& w) {
    const std::size_t n = x.size();
    w.a.resize(n);
    if (model.kind == ModelKind::classical) {
        std::fill(w.a.begin(), w.a.end(), 1.0);
    } else if (model.kind == ModelKind::random_env) {
        std::copy(model.field.bonds.begin(), model.field.bonds.end(), w.a.begin());
    } else {
        for (std::size_t b = 0; b < n; ++b) w.a[b] = model.field.bond_fn.value(x[b], x[(b + 1) % n]);
    }
}

}  // namespace detail

// One step of the chosen model. If `control` is set, adds the bond flux
// c_b (random_env/classical: N abar h_b; nongradient: N h_b a_b (1 - D_b xi)),
// and accumulates the quadratic cost and the log-likelihood ratio.
inline void step_model(const ModelSpec& model, std::vector<double>& x, double t, double dt, Rng& rng, StepWork& w,
                       const SpaceTimeFn* control = nullptr, Trajectory* acc = nullptr) {
    const std::size_t n = x.size();
    const double nd = static_cast<double>(n);
    const double n2 = nd * nd;
    if (dt * n2 > model.c_stab * (1.0 + 1e-12))
        fail(ErrorCode::InvalidArgument, "dt*N^2 = " + std::to_string(dt * n2) + " exceeds c_stab = " +
                                             std::to_string(model.c_stab));
    detail::fill_bonds(model, x, w);
    w.psi1.resize(n);
    for (std::size_t i = 0; i < n; ++i) w.psi1[i] = model.pot.d1(x[i]);
    w.eta.resize(n);
    std::normal_distribution<double> n01;
    for (std::size_t b = 0; b < n; ++b) w.eta[b] = n01(rng);

    w.flux.resize(n);
    for (std::size_t b = 0; b < n; ++b) {
        const std::size_t bp = (b + 1) % n;
        double drift;
        if (model.kind == ModelKind::classical) {
            drift = n2 * (w.psi1[bp] - w.psi1[b]);
        } else if (model.kind == ModelKind::random_env) {
            drift = n2 * (w.a[b] * (w.psi1[bp] - w.psi1[b]));
        } else {
            const auto& fn = model.field.bond_fn;
            drift = n2 * (w.a[b] * (w.psi1[bp] - w.psi1[b]) + fn.dx(x[b], x[bp]) - fn.dy(x[b], x[bp]));
        }
        w.flux[b] = drift * dt;
    }

    if (control) {
        w.c.resize(n);
        const double abar_v = model.kind == ModelKind::nongradient ? 0.0 : model.abar_value();
        const auto band = model.cylinder.band();
        for (std::size_t b = 0; b < n; ++b) {
            const double h = (*control)(t, (static_cast<double>(b) + 0.5) / nd);
            if (model.kind == ModelKind::nongradient)
                w.c[b] = nd * h * w.a[b] * (1.0 - cylinder_gradient_difference(band, x, b));
            else
                w.c[b] = nd * abar_v * h;
        }
        // Only c modulo constants acts on X; the 1/a-weighted projection is the
        // drift seen by the likelihood ratio.
        double num = 0.0, den = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            num += w.c[b] / w.a[b];
            den += 1.0 / w.a[b];
        }
        const double shift = num / den;
        double cost = 0.0, llr = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            cost += 0.5 * w.c[b] * w.c[b] / (n2 * w.a[b]) * dt;
            const double cp = w.c[b] - shift;
            llr += cp * cp * dt / (4.0 * n2 * w.a[b]) + cp * w.eta[b] * std::sqrt(dt) / (nd * std::sqrt(2.0 * w.a[b]));
            w.flux[b] += w.c[b] * dt;
        }
        if (acc) {
            acc->girsanov_cost += cost;
            acc->log_lr += llr;
        }
    }

    for (std::size_t b = 0; b < n; ++b) w.flux[b] += nd * std::sqrt(2.0 * dt * w.a[b]) * w.eta[b];

    for (std::size_t i = 0; i < n; ++i) {
        const double dx = w.flux[i] - w.flux[(i + n - 1) % n];
        if (!std::isfinite(dx) || std::abs(dx) > model.blowup)
            fail(ErrorCode::UnstableStep, "increment " + std::to_string(dx) + " at site " + std::to_string(i));
        x[i] += dx;
    }
}

inline void step_classical(std::vector<double>& x, const SingleSitePotential& pot, double dt, Rng& rng,
                           double c_stab = 0.1) {
    auto m = ModelSpec::classical(pot, x.size());
    m.c_stab = c_stab;
    StepWork w;
    step_model(m, x, 0.0, dt, rng, w);
}

inline void step_random_env(std::vector<double>& x, const SingleSitePotential& pot, const ConductanceField& field,
                            double dt, Rng& rng, double c_stab = 0.1) {
    auto m = ModelSpec::random_env(pot, field);
    m.c_stab = c_stab;
    StepWork w;
    step_model(m, x, 0.0, dt, rng, w);
}

inline void step_nongradient(std::vector<double>& x, const SingleSitePotential& pot, const BondFunction& fn, double dt,
                             Rng& rng, double c_stab = 0.1) {
    auto m = ModelSpec::nongradient(pot, fn, x.size());
    m.c_stab = c_stab;
    StepWork w;
    step_model(m, x, 0.0, dt, rng, w);
}

inline void step_tilted(std::vector<double>& x, const ModelSpec& model, const SpaceTimeFn& h, double t, double dt,
                        Rng& rng, Trajectory& acc) {
    StepWork w;
    step_model(model, x, t, dt, rng, w, &h, &acc);
}

struct SimulationOptions {
    double t_end = 0.0;
    double dt = 0.0;
    std::vector<double> snapshot_times;
    std::size_t replicas = 1;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    bool condition_mean = false;   // Gaussian only: start exactly on the hyperplane
    std::optional<double> mean = std::nullopt;  // hyperplane value; defaults to the mean of rho0 at the sites
    bool initial_log_lr = false;   // record log d(start law)/d(start law at constant mean)
};

// Runs independent replicas from the local Gibbs state of rho0. Replica r uses
// the stream derive_seed(seed, r); outputs do not depend on scheduling.
inline std::vector<Trajectory> simulate(const ModelSpec& model, const FreeEnergyTable& table,
                                        const std::function<double(double)>& rho0, const SimulationOptions& opt) {
    model.validate();
    require(opt.t_end >= 0.0 && opt.dt > 0.0, "simulate needs T >= 0 and dt > 0");
    require(opt.replicas >= 1, "simulate needs at least one replica");
    for (double s : opt.snapshot_times)
        require(s >= -1e-12 && s <= opt.t_end + 1e-12, "snapshot times must lie in [0, T]");
    for (std::size_t i = 1; i < opt.snapshot_times.size(); ++i)
        require(opt.snapshot_times[i] > opt.snapshot_times[i - 1], "snapshot times must increase");

    const auto n_steps = static_cast<std::size_t>(std::ceil(opt.t_end / opt.dt - 1e-9));
    const double dt = n_steps == 0 ? opt.dt : opt.t_end / static_cast<double>(n_steps);
    std::vector<std::size_t> snap_steps;
    for (double s : opt.snapshot_times)
        snap_steps.push_back(static_cast<std::size_t>(std::llround(s / (n_steps == 0 ? 1.0 : dt))));

    const LocalGibbs init(model.pot, table, rho0, model.n);
    const double hyper = opt.mean.value_or(init.target_mean());
    if (opt.initial_log_lr) require(init.gaussian() && opt.condition_mean, "initial likelihood ratio needs the conditioned Gaussian start");
    const SpaceTimeFn* control = model.tilt ? &*model.tilt : nullptr;

    std::vector<Trajectory> out(opt.replicas);
    parallel_for(opt.replicas, opt.threads, [&](std::size_t r) {
        Trajectory tr;
        tr.seed = derive_seed(opt.seed, r);
        Rng rng(tr.seed);
        auto s0 = opt.condition_mean ? init.conditioned(rng, hyper) : init(rng);
        if (opt.initial_log_lr) {
            // <v, x - m> - |v|^2 / 2 with v = lambda - mean(lambda)
            const auto& lam = init.lambdas();
            double lbar = 0.0;
            for (double l : lam) lbar += l / static_cast<double>(lam.size());
            double dot = 0.0, vv = 0.0;
            for (std::size_t i = 0; i < lam.size(); ++i) {
                const double v = lam[i] - lbar;
                dot += v * (s0.values[i] - hyper);
                vv += v * v;
            }
            tr.log_lr_initial = dot - 0.5 * vv;
        }
        std::vector<double> x = s0.values;
        const double mean0 = s0.empirical_mean();
        StepWork w;
        std::size_t next = 0;
        auto record = [&](std::size_t step) {
            while (next < snap_steps.size() && snap_steps[next] == step) {
                SpinConfiguration s(x);
                s.mean = mean0;
                tr.states.push_back(std::move(s));
                tr.times.push_back(static_cast<double>(step) * dt);
                ++next;
            }
        };
        record(0);
        for (std::size_t k = 0; k < n_steps; ++k) {
            step_model(model, x, static_cast<double>(k) * dt, dt, rng, w, control, &tr);
            record(k + 1);
        }
        out[r] = std::move(tr);
    });
    return out;
}

// Ensemble mean of the step embeddings at each snapshot.
inline std::vector<GridFunction> ensemble_mean_profile(const std::vector<Trajectory>& ens, std::size_t m) {
    require(!ens.empty(), "empty ensemble");
    const std::size_t k = ens.front().states.size();
    std::vector<GridFunction> out;
    for (std::size_t s = 0; s < k; ++s) {
        std::vector<double> col(ens.size());
        GridFunction g(m);
        std::vector<GridFunction> emb;
        emb.reserve(ens.size());
        for (const auto& tr : ens) emb.push_back(embed_step(tr.states[s], m));
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t r = 0; r < ens.size(); ++r) col[r] = emb[r][j];
            g[j] = pairwise_sum(col) / static_cast<double>(ens.size());
        }
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace kawasaki
