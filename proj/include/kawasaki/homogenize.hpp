#pragma once

// Effective coefficients: the harmonic-mean conductance of a random
// environment, and upper bounds on the non-gradient coefficient
// ahat(y) = inf_F a_F(y) over a small family of cylinder functions.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "error.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "potential.hpp"
#include "random.hpp"

namespace kawasaki {

// F(u_{-k}, ..., u_k) = sum_j l_j u_j + 1/2 sum_{j,l} Q_{jl} u_j u_l with Q symmetric.
struct CylinderFn {
    int k = 0;
    std::vector<double> linear{0.0};  // 2k+1
    std::vector<double> quad{0.0};    // (2k+1)^2, row-major

    static CylinderFn zero(int window) {
        require(window >= 0, "cylinder window must be nonnegative");
        CylinderFn f;
        f.k = window;
        const auto w = static_cast<std::size_t>(2 * window + 1);
        f.linear.assign(w, 0.0);
        f.quad.assign(w * w, 0.0);
        return f;
    }

    // Cylinder function whose band sums are s_0..s_{2k} (see band()).
    static CylinderFn from_band(int window, std::span<const double> s) {
        auto f = zero(window);
        require(s.size() == static_cast<std::size_t>(2 * window + 1), "band size must be 2k+1");
        f.set_q(0, 0, s[0]);
        for (int d = 1; d <= 2 * window; ++d) {
            f.set_q(-window, -window + d, s[static_cast<std::size_t>(d)]);
            f.set_q(-window + d, -window, s[static_cast<std::size_t>(d)]);
        }
        return f;
    }

    std::size_t width() const noexcept { return static_cast<std::size_t>(2 * k + 1); }
    double q(int j, int l) const { return quad[static_cast<std::size_t>(j + k) * width() + static_cast<std::size_t>(l + k)]; }
    void set_q(int j, int l, double v) { quad[static_cast<std::size_t>(j + k) * width() + static_cast<std::size_t>(l + k)] = v; }

    void validate() const {
        require(k >= 0 && linear.size() == width() && quad.size() == width() * width(), "malformed cylinder function");
        for (int j = -k; j <= k; ++j)
            for (int l = -k; l <= k; ++l) require(q(j, l) == q(l, j), "cylinder quadratic part must be symmetric");
    }

    double value(std::span<const double> u) const {
        require(u.size() == width(), "cylinder window size mismatch");
        double s = 0.0;
        for (std::size_t j = 0; j < width(); ++j) {
            s += linear[j] * u[j];
            for (std::size_t l = 0; l < width(); ++l) s += 0.5 * quad[j * width() + l] * u[j] * u[l];
        }
        return s;
    }

    // S_d = sum_{l-j=d} Q_{jl} for d = 0..2k. For xi = sum_i tau_i F,
    // d_{b+1} xi - d_b xi = sum_{|d|<=2k} S_|d| (x_{b+1+d} - x_{b+d}); the linear
    // part telescopes away.
    std::vector<double> band() const {
        std::vector<double> s(width(), 0.0);
        for (int j = -k; j <= k; ++j)
            for (int l = j; l <= k; ++l) s[static_cast<std::size_t>(l - j)] += q(j, l);
        return s;
    }
};

// d_{b+1} xi - d_b xi on a periodic configuration, from the band sums.
inline double cylinder_gradient_difference(std::span<const double> band, std::span<const double> x, std::size_t b) {
    const long n = static_cast<long>(x.size());
    auto at = [&](long i) { return x[static_cast<std::size_t>(((i % n) + n) % n)]; };
    const long bl = static_cast<long>(b);
    double r = band[0] * (at(bl + 1) - at(bl));
    for (std::size_t d = 1; d < band.size(); ++d) {
        const long dl = static_cast<long>(d);
        r += band[d] * (at(bl + 1 + dl) - at(bl + dl) + at(bl + 1 - dl) - at(bl - dl));
    }
    return r;
}

// 1 / mean(1/a)
inline double abar(std::span<const double> samples) {
    if (samples.empty()) fail(ErrorCode::EmptyField, "no conductance samples");
    double s = 0.0;
    for (double a : samples) {
        require(a > 0.0, "conductance samples must be positive");
        s += 1.0 / a;
    }
    return static_cast<double>(samples.size()) / s;
}

inline double abar(const ConductanceField& field) {
    require(field.kind != ConductanceKind::state_dependent, "abar needs a quenched field");
    return abar(field.bonds);
}

struct AFResult {
    double value = 0.0;
    double se = 0.0;
};

namespace detail {

// Window samples x_{-2k}..x_{2k+1} i.i.d. from mu^lambda, reduced to the bond
// value a(x_0, x_1) and the features g_0 = x_1 - x_0,
// g_d = (x_{1+d} - x_d) + (x_{1-d} - x_{-d}) for d >= 1.
struct FeatureSamples {
    int k = 0;
    std::vector<double> a;
    std::vector<double> g;  // samples x (2k+1), row-major

    std::size_t size() const noexcept { return a.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(2 * k + 1); }
};

inline FeatureSamples draw_features(const SingleSitePotential& pot, double lambda, const BondFunction& bond, int k,
                                    std::size_t samples, Rng& rng) {
    FeatureSamples fs;
    fs.k = k;
    const std::size_t dim = fs.dim();
    const std::size_t sites = static_cast<std::size_t>(4 * k + 2);
    const long off = 2 * k;  // x_j stored at j + off
    SingleSiteSampler sampler(pot, lambda);
    std::vector<double> x(sites);
    fs.a.resize(samples);
    fs.g.resize(samples * dim);
    for (std::size_t s = 0; s < samples; ++s) {
        for (auto& v : x) v = sampler(rng);
        auto at = [&](long j) { return x[static_cast<std::size_t>(j + off)]; };
        fs.a[s] = bond.value(at(0), at(1));
        double* g = &fs.g[s * dim];
        g[0] = at(1) - at(0);
        for (long d = 1; d <= 2 * k; ++d) g[d] = at(1 + d) - at(d) + at(1 - d) - at(-d);
    }
    return fs;
}

// Exact quadratic a_F(s) = E[a] - 2 s.E[a g] + s.E[a g g^T] s for the sample set,
// restricted to the first `dim` features.
struct QuadraticModel {
    double m0 = 0.0;
    std::vector<double> v;
    std::vector<double> mm;  // dim x dim
    std::size_t dim = 0;

    QuadraticModel(const FeatureSamples& fs, std::size_t d) : v(d, 0.0), mm(d * d, 0.0), dim(d) {
        const std::size_t n = fs.size(), full = fs.dim();
        std::vector<double> col(n);
        auto mean = [&](auto&& term) {
            for (std::size_t s = 0; s < n; ++s) col[s] = term(s);
            return pairwise_sum(col) / static_cast<double>(n);
        };
        m0 = mean([&](std::size_t s) { return fs.a[s]; });
        for (std::size_t i = 0; i < d; ++i) {
            v[i] = mean([&](std::size_t s) { return fs.a[s] * fs.g[s * full + i]; });
            for (std::size_t j = i; j < d; ++j) {
                const double e = mean([&](std::size_t s) { return fs.a[s] * fs.g[s * full + i] * fs.g[s * full + j]; });
                mm[i * d + j] = e;
                mm[j * d + i] = e;
            }
        }
    }

    double operator()(std::span<const double> s) const {
        double r = m0;
        for (std::size_t i = 0; i < dim; ++i) {
            r -= 2.0 * s[i] * v[i];
            for (std::size_t j = 0; j < dim; ++j) r += s[i] * mm[i * dim + j] * s[j];
        }
        return r;
    }
};

inline double sample_se(const FeatureSamples& fs, std::span<const double> s) {
    const std::size_t n = fs.size(), full = fs.dim();
    std::vector<double> val(n), sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        double dxi = 0.0;
        for (std::size_t d = 0; d < s.size(); ++d) dxi += s[d] * fs.g[i * full + d];
        val[i] = fs.a[i] * (1.0 - dxi) * (1.0 - dxi);
        sq[i] = val[i] * val[i];
    }
    const double m = pairwise_sum(val) / static_cast<double>(n);
    const double var = std::max(pairwise_sum(sq) / static_cast<double>(n) - m * m, 0.0);
    return std::sqrt(var / static_cast<double>(std::max<std::size_t>(n - 1, 1)));
}

}  // namespace detail

// a_F(y) = E[a(x_0, x_1) (1 - d_1 xi + d_0 xi)^2] under the product measure with
// one-site marginal mu^{phi'(y)}, by Monte Carlo over i.i.d. windows.
inline AFResult a_F(const SingleSitePotential& pot, const FreeEnergyTable& table, const BondFunction& bond, double y,
                    const CylinderFn& f, std::size_t samples, Rng& rng) {
    f.validate();
    require(samples >= 2, "a_F needs at least two samples");
    const auto fs = detail::draw_features(pot, table.d1(y), bond, f.k, samples, rng);
    const auto s = f.band();
    const detail::QuadraticModel model(fs, fs.dim());
    return {model(s), detail::sample_se(fs, s)};
}

struct AhatEntry {
    double y = 0.0;
    int k = 0;
    double value = 0.0;  // best a_F found in the window-k family
    double se = 0.0;
    std::vector<double> band;  // minimising band sums s_0..s_{2k}

    CylinderFn minimiser() const { return CylinderFn::from_band(k, band); }
};

struct AhatOptions {
    double box = 1.0;        // |s_d| <= box
    double initial_step = 0.25;
    double min_step = 1e-7;
    int max_sweeps = 2000;
    double max_rel_se = 0.05;
    unsigned threads = 1;
};

namespace detail {

// Coordinate search with shrinking steps; only strict improvements are taken,
// so the result never exceeds the objective at the starting point.
inline std::vector<double> coordinate_search(const QuadraticModel& f, std::vector<double> s, const AhatOptions& opt) {
    double best = f(s);
    double step = opt.initial_step;
    for (int sweep = 0; sweep < opt.max_sweeps && step >= opt.min_step; ++sweep) {
        bool moved = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            for (double dir : {1.0, -1.0}) {
                const double old = s[i];
                s[i] = std::clamp(old + dir * step, -opt.box, opt.box);
                const double val = f(s);
                if (val < best) {
                    best = val;
                    moved = true;
                    break;
                }
                s[i] = old;
            }
        }
        if (!moved) step *= 0.5;
    }
    return s;
}

}  // namespace detail

// For each y, minimises a_F over windows k = 0..k_max on one common sample set
// per y (stream derive_seed(seed, y index)); window k+1 starts from the window-k
// optimum, so the best values are nonincreasing in k.
inline std::vector<AhatEntry> ahat_approx(const SingleSitePotential& pot, const FreeEnergyTable& table,
                                          const BondFunction& bond, std::span<const double> y_grid, int k_max,
                                          std::size_t samples, std::uint64_t seed, const AhatOptions& opt = {}) {
    require(k_max >= 0 && k_max <= 3, "ahat_approx supports 0 <= k_max <= 3");
    require(samples >= 2, "ahat_approx needs at least two samples");
    std::vector<std::vector<AhatEntry>> per_y(y_grid.size());
    parallel_for(y_grid.size(), opt.threads, [&](std::size_t iy) {
        Rng rng = make_rng(seed, iy);
        const auto fs = detail::draw_features(pot, table.d1(y_grid[iy]), bond, k_max, samples, rng);
        std::vector<double> s;
        for (int k = 0; k <= k_max; ++k) {
            const std::size_t dim = static_cast<std::size_t>(2 * k + 1);
            s.resize(dim, 0.0);
            const detail::QuadraticModel model(fs, dim);
            s = detail::coordinate_search(model, s, opt);
            AhatEntry e;
            e.y = y_grid[iy];
            e.k = k;
            e.value = model(s);
            e.se = detail::sample_se(fs, s);
            e.band = s;
            if (e.se > opt.max_rel_se * std::abs(e.value))
                fail(ErrorCode::MCVarianceTooHigh, "a_F standard error " + std::to_string(e.se) + " too large at y=" +
                                                       std::to_string(e.y));
            per_y[iy].push_back(std::move(e));
        }
    });
    std::vector<AhatEntry> out;
    for (auto& v : per_y)
        for (auto& e : v) out.push_back(std::move(e));
    return out;
}

// Piecewise-linear y -> ahat(y) from the largest-window entries.
class AhatTable {
public:
    AhatTable() = default;
    explicit AhatTable(const std::vector<AhatEntry>& entries) {
        int kmax = 0;
        for (const auto& e : entries) kmax = std::max(kmax, e.k);
        for (const auto& e : entries)
            if (e.k == kmax) { y_.push_back(e.y); v_.push_back(e.value); }
        require(!y_.empty(), "empty ahat table");
        for (std::size_t i = 1; i < y_.size(); ++i) require(y_[i] > y_[i - 1], "ahat grid must increase");
    }
    AhatTable(std::vector<double> y, std::vector<double> v) : y_(std::move(y)), v_(std::move(v)) {
        require(!y_.empty() && y_.size() == v_.size(), "malformed ahat table");
    }

    double operator()(double y) const {
        if (y <= y_.front()) return v_.front();
        if (y >= y_.back()) return v_.back();
        const auto it = std::upper_bound(y_.begin(), y_.end(), y);
        const std::size_t i = static_cast<std::size_t>(it - y_.begin()) - 1;
        const double s = (y - y_[i]) / (y_[i + 1] - y_[i]);
        return (1.0 - s) * v_[i] + s * v_[i + 1];
    }

private:
    std::vector<double> y_, v_;
};

}  // namespace kawasaki
