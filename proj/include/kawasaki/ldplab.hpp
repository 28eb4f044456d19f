#pragma once

// Monte Carlo large-deviation experiments: tube probabilities around a target
// path, the tilted (importance sampling) estimator, normalised log-probability
// curves and local averaging diagnostics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dynamics.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "potential.hpp"
#include "random.hpp"
#include "sobolev.hpp"

namespace kawasaki {

// Trajectories within `radius` of `target` in max-over-snapshots H^-1.
struct DeviationEvent {
    SpaceTimeProfile target;
    double radius = std::numeric_limits<double>::infinity();

    void validate(double conserved_mean, double tol = 1e-8) const {
        require(radius > 0.0, "tube radius must be positive");
        require(!target.frames.empty() && target.frames.size() == target.times.size(), "target needs frames");
        for (std::size_t k = 0; k < target.frames.size(); ++k)
            if (std::abs(target.frames[k].mean() - conserved_mean) > tol * std::max(1.0, std::abs(conserved_mean)))
                fail(ErrorCode::MeanMismatch, "target mean " + std::to_string(target.frames[k].mean()) +
                                                  " differs from the conserved mean " + std::to_string(conserved_mean));
    }
};

// Max over snapshots of the H^-1 distance of one trajectory from the target.
// The spatial mean of the difference is removed, so a start that is not exactly
// on the hyperplane is compared by its fluctuation only.
inline double tube_distance(const Trajectory& tr, const SpaceTimeProfile& target) {
    require(tr.states.size() == target.frames.size(), "trajectory and target have different snapshot counts");
    const std::size_t m = target.frames.front().size();
    double worst = 0.0;
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
        const GridFunction d = embed_step(tr.states[k], m) - target.frames[k];
        worst = std::max(worst, std::sqrt(std::max(hminus1_norm(d.centered()), 0.0)));
    }
    return worst;
}

// Hard failure if any replica lost its mean.
inline void audit_conservation(const std::vector<Trajectory>& ens, double tol) {
    for (std::size_t r = 0; r < ens.size(); ++r)
        for (const auto& s : ens[r].states) {
            const double drift = std::abs(s.empirical_mean() - s.mean);
            if (drift > tol * std::max(1.0, std::abs(s.mean)))
                fail(ErrorCode::MeanMismatch, "conservation audit: replica " + std::to_string(r) + " drifted by " +
                                                  std::to_string(drift));
        }
}

inline std::vector<double> tube_distances(const std::vector<Trajectory>& ens, const SpaceTimeProfile& target,
                                          unsigned threads = 1) {
    std::vector<double> d(ens.size());
    parallel_for(ens.size(), threads, [&](std::size_t r) { d[r] = tube_distance(ens[r], target); });
    return d;
}

inline double tube_fraction(const std::vector<double>& distances, double radius) {
    require(!distances.empty(), "no distances");
    std::size_t hits = 0;
    for (double d : distances) hits += d <= radius ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(distances.size());
}

inline double median(std::vector<double> v) {
    require(!v.empty(), "median of an empty set");
    const std::size_t h = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(h), v.end());
    if (v.size() % 2 == 1) return v[h];
    const double hi = v[h];
    return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<long>(h)));
}

// factor x median distance of a pilot ensemble from its reference path.
inline double calibrate_radius(const std::vector<double>& pilot_distances, double factor = 3.0) {
    require(factor > 0.0, "calibration factor must be positive");
    return factor * median(pilot_distances);
}

// H^-1 distance of the ensemble-mean step profile from a reference path, per snapshot.
inline std::vector<double> ensemble_tracking_distance(const std::vector<Trajectory>& ens, const SpaceTimeProfile& target) {
    const std::size_t m = target.frames.front().size();
    const auto mean = ensemble_mean_profile(ens, m);
    require(mean.size() == target.frames.size(), "ensemble and target have different snapshot counts");
    std::vector<double> out;
    for (std::size_t k = 0; k < mean.size(); ++k)
        out.push_back(std::sqrt(std::max(hminus1_norm((mean[k] - target.frames[k]).centered()), 0.0)));
    return out;
}

using ModelFactory = std::function<ModelSpec(std::size_t n)>;

struct TubeOptions {
    std::vector<std::size_t> n_list{16, 32, 64};
    std::size_t replicas = 1000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    double dt_factor = 0.1;  // dt = dt_factor / N^2
    bool condition_mean = true;
    double conservation_tol = 1e-9;
};

struct TubeEstimate {
    std::size_t n = 0;
    std::size_t replicas = 0;
    std::size_t hits = 0;
    double p_hat = 0.0;
    double se = 0.0;
    std::uint64_t seed = 0;
    bool zero_hits = false;
    std::vector<double> distances;
};

namespace detail {

inline SimulationOptions tube_sim_options(const SpaceTimeProfile& target, std::size_t n, std::size_t replicas,
                                          std::uint64_t seed, unsigned threads, double dt_factor, bool condition) {
    const double nd = static_cast<double>(n);
    SimulationOptions o;
    o.t_end = target.times.back();
    o.dt = dt_factor / (nd * nd);
    o.snapshot_times = target.times;
    o.replicas = replicas;
    o.seed = seed;
    o.threads = threads;
    o.condition_mean = condition;
    return o;
}

// Snapshots land on the nearest step, so they may sit up to half a step off the target times.
inline void check_snapshot_grid(const std::vector<Trajectory>& ens, const SpaceTimeProfile& target, double dt) {
    const auto& t = ens.front().times;
    require(t.size() == target.times.size(), "snapshot count differs from the target");
    for (std::size_t k = 0; k < t.size(); ++k)
        require(std::abs(t[k] - target.times[k]) <= 0.5 * dt + 1e-12, "target times are not on the step grid");
}

}  // namespace detail

// Fraction of replicas started from the local Gibbs state of rho_start that stay
// in the tube, for each N. Zero hits are flagged, not thrown.
inline std::vector<TubeEstimate> estimate_tube_probability(const ModelFactory& make_model, const FreeEnergyTable& table,
                                                           const std::function<double(double)>& rho_start,
                                                           const DeviationEvent& event, const TubeOptions& opt) {
    require(!opt.n_list.empty() && opt.replicas >= 2, "tube estimate needs N values and at least two replicas");
    event.validate(event.target.frames.front().mean());
    std::vector<TubeEstimate> out;
    for (std::size_t n : opt.n_list) {
        const ModelSpec model = make_model(n);
        require(model.n == n, "model factory returned the wrong lattice size");
        TubeEstimate e;
        e.n = n;
        e.replicas = opt.replicas;
        e.seed = derive_seed(opt.seed, n);
        const auto ens = simulate(model, table, rho_start,
                                  detail::tube_sim_options(event.target, n, opt.replicas, e.seed, opt.threads,
                                                           opt.dt_factor, opt.condition_mean));
        detail::check_snapshot_grid(ens, event.target, opt.dt_factor / double(n * n));
        audit_conservation(ens, opt.conservation_tol);
        e.distances = tube_distances(ens, event.target, opt.threads);
        for (double d : e.distances) e.hits += d <= event.radius ? 1 : 0;
        const double r = static_cast<double>(opt.replicas);
        e.p_hat = static_cast<double>(e.hits) / r;
        e.se = std::sqrt(e.p_hat * (1.0 - e.p_hat) / (r - 1.0));
        e.zero_hits = e.hits == 0;
        out.push_back(std::move(e));
    }
    return out;
}

struct TiltedOptions {
    std::size_t replicas = 1000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    double dt_factor = 0.1;
    double min_ess = 10.0;
    double conservation_tol = 1e-9;
};

struct TiltedEstimate {
    std::size_t n = 0;
    std::size_t replicas = 0;
    std::size_t hits = 0;
    double p_hat = 0.0;
    double se = 0.0;
    double ess = 0.0;                // effective sample size of the weighted indicators
    double mean_log_lr_per_n = 0.0;  // dynamic part of the relative entropy, per site
    double se_log_lr_per_n = 0.0;
    double mean_initial_log_lr_per_n = 0.0;
    double mean_cost_per_n = 0.0;    // accumulated control cost, per site
    std::uint64_t seed = 0;
    std::vector<double> distances;
    std::vector<double> log_weights;  // log dP/dQ per replica
};

// Importance sampling with the tilted dynamics started from the local Gibbs
// state of rho_start. Weights are exp(-(log_lr + log_lr_initial)); the initial
// part is the exact Gaussian hyperplane density ratio to the flat start.
inline TiltedEstimate tilted_estimate(ModelSpec model, const SpaceTimeFn& h, const FreeEnergyTable& table,
                                      const std::function<double(double)>& rho_start, const DeviationEvent& event,
                                      const TiltedOptions& opt) {
    require(opt.replicas >= 2, "tilted estimate needs at least two replicas");
    event.validate(event.target.frames.front().mean());
    model.tilt = h;
    const bool gaussian = model.pot.is_gaussian();
    if (!gaussian) {
        const double r0 = rho_start(0.0);
        for (std::size_t i = 1; i < model.n; ++i)
            require(rho_start(static_cast<double>(i) / static_cast<double>(model.n)) == r0,
                    "a tilted start needs the Gaussian potential");
    }
    TiltedEstimate e;
    e.n = model.n;
    e.replicas = opt.replicas;
    e.seed = derive_seed(opt.seed, model.n);
    auto sim = detail::tube_sim_options(event.target, model.n, opt.replicas, e.seed, opt.threads, opt.dt_factor, gaussian);
    sim.initial_log_lr = gaussian;
    const auto ens = simulate(model, table, rho_start, sim);
    detail::check_snapshot_grid(ens, event.target, sim.dt);
    audit_conservation(ens, opt.conservation_tol);
    e.distances = tube_distances(ens, event.target, opt.threads);

    const double r = static_cast<double>(opt.replicas);
    const double nd = static_cast<double>(model.n);
    std::vector<double> w(opt.replicas), w2(opt.replicas), llr(opt.replicas), llr2(opt.replicas), init(opt.replicas),
        cost(opt.replicas);
    for (std::size_t k = 0; k < opt.replicas; ++k) {
        const auto& tr = ens[k];
        const double lw = -(tr.log_lr + tr.log_lr_initial);
        e.log_weights.push_back(lw);
        const bool hit = e.distances[k] <= event.radius;
        e.hits += hit ? 1 : 0;
        w[k] = hit ? std::exp(lw) : 0.0;
        w2[k] = w[k] * w[k];
        llr[k] = tr.log_lr / nd;
        llr2[k] = llr[k] * llr[k];
        init[k] = tr.log_lr_initial / nd;
        cost[k] = tr.girsanov_cost / nd;
    }
    const double sw = pairwise_sum(w), sw2 = pairwise_sum(w2);
    e.p_hat = sw / r;
    e.se = std::sqrt(std::max(sw2 / r - e.p_hat * e.p_hat, 0.0) / (r - 1.0));
    e.ess = sw2 > 0.0 ? sw * sw / sw2 : 0.0;
    e.mean_log_lr_per_n = pairwise_sum(llr) / r;
    e.se_log_lr_per_n =
        std::sqrt(std::max(pairwise_sum(llr2) / r - e.mean_log_lr_per_n * e.mean_log_lr_per_n, 0.0) / (r - 1.0));
    e.mean_initial_log_lr_per_n = pairwise_sum(init) / r;
    e.mean_cost_per_n = pairwise_sum(cost) / r;
    if (e.ess < opt.min_ess)
        fail(ErrorCode::WeightDegeneracy, "effective sample size " + std::to_string(e.ess) + " below " +
                                              std::to_string(opt.min_ess) + " at N=" + std::to_string(model.n));
    return e;
}

struct ProbabilityPoint {
    std::size_t n = 0;
    double p_hat = 0.0;
    double se = 0.0;
};

struct RateCurveRow {
    std::size_t n = 0;
    double value = 0.0;  // -log(p_hat) / N
    double se = 0.0;     // delta method: se(p) / (p N)
};

inline std::vector<RateCurveRow> empirical_rate_curve(const std::vector<ProbabilityPoint>& pts) {
    std::vector<RateCurveRow> out;
    for (const auto& p : pts) {
        require(p.n > 0, "rate curve needs N > 0");
        if (!(p.p_hat > 0.0)) fail(ErrorCode::ZeroHits, "no hits at N=" + std::to_string(p.n));
        const double nd = static_cast<double>(p.n);
        out.push_back({p.n, 0.0 - std::log(p.p_hat) / nd, p.se / (p.p_hat * nd)});
    }
    return out;
}

inline std::vector<ProbabilityPoint> probability_points(const std::vector<TubeEstimate>& est) {
    std::vector<ProbabilityPoint> out;
    for (const auto& e : est) out.push_back({e.n, e.p_hat, e.se});
    return out;
}

// F(x_{i-k}, ..., x_{i+k}) read on the window centred at i and, when known, its expectation under the product
// measure with site mean rho.
struct LocalFn {
    std::string name;
    std::size_t radius = 0;
    std::function<double(std::span<const double>)> f;
    std::function<double(double)> closed_form;  // may be empty

    static LocalFn one() {
        return {"1", 0, [](std::span<const double>) { return 1.0; }, [](double) { return 1.0; }};
    }
    static LocalFn site() {
        return {"x0", 0, [](std::span<const double> w) { return w[w.size() / 2]; }, [](double rho) { return rho; }};
    }
    static LocalFn dpsi(const SingleSitePotential& pot, const FreeEnergyTable& table) {
        return {"psi'(x0)", 0, [pot](std::span<const double> w) { return pot.d1(w[w.size() / 2]); },
                [&table](double rho) { return table.d1(rho); }};
    }
};

struct LocalAverageOptions {
    std::size_t quad_points = 64;   // theta nodes for the right-hand side
    std::size_t samples = 4000;     // product-measure samples per node
    double max_se = 0.05;           // absolute bound on the combined standard error
};

struct LocalAverageReport {
    double lhs = 0.0;
    double lhs_se = 0.0;
    double rhs = 0.0;
    double rhs_se = 0.0;
    double rhs_closed = std::numeric_limits<double>::quiet_NaN();
    double diff = 0.0;
    double combined_se = 0.0;
};

// lhs: ensemble mean of (1/N) sum_i J(i/N) F(window at i); rhs: midpoint
// quadrature of int J Ftilde(rho_ref) with Ftilde by single-site MC.
inline LocalAverageReport local_average_check(const std::vector<SpinConfiguration>& states,
                                              const std::function<double(double)>& j, const LocalFn& fn,
                                              const SingleSitePotential& pot, const FreeEnergyTable& table,
                                              const std::function<double(double)>& rho_ref, Rng& rng,
                                              const LocalAverageOptions& opt = {}) {
    require(states.size() >= 2, "local averaging needs at least two configurations");
    require(opt.quad_points >= 1 && opt.samples >= 2, "local averaging needs quadrature nodes and samples");
    const std::size_t n = states.front().n();
    const std::size_t width = 2 * fn.radius + 1;
    require(n >= width, "window wider than the lattice");
    const double nd = static_cast<double>(n);

    std::vector<double> jv(n);
    for (std::size_t i = 0; i < n; ++i) jv[i] = j(static_cast<double>(i) / nd);
    std::vector<double> lvals(states.size()), lsq(states.size()), win(width), terms(n);
    for (std::size_t r = 0; r < states.size(); ++r) {
        const auto& x = states[r].values;
        require(x.size() == n, "configurations have different sizes");
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t q = 0; q < width; ++q) win[q] = x[(i + n + q - fn.radius) % n];
            terms[i] = jv[i] * fn.f(win);
        }
        lvals[r] = pairwise_sum(terms) / nd;
        lsq[r] = lvals[r] * lvals[r];
    }
    LocalAverageReport rep;
    const double rs = static_cast<double>(states.size());
    rep.lhs = pairwise_sum(lvals) / rs;
    rep.lhs_se = std::sqrt(std::max(pairwise_sum(lsq) / rs - rep.lhs * rep.lhs, 0.0) / (rs - 1.0));

    const double qd = static_cast<double>(opt.quad_points);
    const double sd = static_cast<double>(opt.samples);
    std::vector<double> node(opt.quad_points), node_var(opt.quad_points), closed(opt.quad_points), fs(opt.samples),
        fsq(opt.samples);
    for (std::size_t q = 0; q < opt.quad_points; ++q) {
        const double th = (static_cast<double>(q) + 0.5) / qd;
        const double rho = rho_ref(th);
        const SingleSiteSampler sampler(pot, table.d1(rho));
        for (std::size_t s = 0; s < opt.samples; ++s) {
            for (auto& v : win) v = sampler(rng);
            fs[s] = fn.f(win);
            fsq[s] = fs[s] * fs[s];
        }
        const double mu = pairwise_sum(fs) / sd;
        const double var = std::max(pairwise_sum(fsq) / sd - mu * mu, 0.0) / (sd - 1.0);
        const double jq = j(th);
        node[q] = jq * mu;
        node_var[q] = jq * jq * var;
        if (fn.closed_form) closed[q] = jq * fn.closed_form(rho);
    }
    rep.rhs = pairwise_sum(node) / qd;
    rep.rhs_se = std::sqrt(pairwise_sum(node_var)) / qd;
    if (fn.closed_form) rep.rhs_closed = pairwise_sum(closed) / qd;
    rep.diff = rep.lhs - rep.rhs;
    rep.combined_se = std::hypot(rep.lhs_se, rep.rhs_se);
    if (rep.combined_se > opt.max_se)
        fail(ErrorCode::MCVarianceTooHigh, "local average combined standard error " + std::to_string(rep.combined_se));
    return rep;
}

}  // namespace kawasaki
