#pragma once

// Single-site potential psi(x) = |x|^p / p + dpsi(x), its tilted Gibbs
// measures mu^lambda(dx) = exp(lambda x - psi(x)) dx / Z, and the macroscopic
// free energy phi obtained as the Legendre transform of the log-partition.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "error.hpp"

namespace kawasaki {

// Bounded C^2 perturbation: clamped cubic spline through the knots (zero slope
// at both end knots), extended by constants outside the knot range.
class Perturbation {
public:
    Perturbation() = default;

    explicit Perturbation(std::vector<std::pair<double, double>> knots) {
        if (knots.empty()) return;
        std::sort(knots.begin(), knots.end());
        require(knots.size() >= 2, "perturbation needs at least two knots");
        for (std::size_t i = 1; i < knots.size(); ++i)
            require(knots[i].first > knots[i - 1].first, "perturbation knots must be distinct");
        for (auto& [x, v] : knots) {
            require(std::isfinite(x) && std::isfinite(v), "perturbation knots must be finite");
            x_.push_back(x);
            v_.push_back(v);
        }
        solve_moments();
        compute_bounds();
    }

    bool empty() const noexcept { return x_.empty(); }
    const std::vector<double>& knots_x() const noexcept { return x_; }
    const std::vector<double>& knots_v() const noexcept { return v_; }

    double eval(double x, int order) const noexcept {
        if (x_.empty()) return 0.0;
        if (x <= x_.front()) return order == 0 ? v_.front() : 0.0;
        if (x >= x_.back()) return order == 0 ? v_.back() : 0.0;
        const auto it = std::upper_bound(x_.begin(), x_.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - x) / h;
        const double b = (x - x_[i]) / h;
        switch (order) {
            case 0:
                return a * v_[i] + b * v_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
            case 1:
                return (v_[i + 1] - v_[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m_[i] + (3.0 * b * b - 1.0) / 6.0 * h * m_[i + 1];
            default:
                return a * m_[i] + b * m_[i + 1];
        }
    }

    // sup |dpsi^(k)| for k = 0, 1, 2
    double bound(int order) const noexcept { return bounds_[std::clamp(order, 0, 2)]; }

private:
    void solve_moments() {
        // Clamped spline: slopes at both ends are zero.
        const std::size_t n = x_.size();
        std::vector<double> a(n), b(n), c(n), d(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (i == 0) {
                const double h = x_[1] - x_[0];
                b[i] = h / 3.0;
                c[i] = h / 6.0;
                d[i] = (v_[1] - v_[0]) / h;
            } else if (i == n - 1) {
                const double h = x_[n - 1] - x_[n - 2];
                a[i] = h / 6.0;
                b[i] = h / 3.0;
                d[i] = -(v_[n - 1] - v_[n - 2]) / h;
            } else {
                const double h0 = x_[i] - x_[i - 1];
                const double h1 = x_[i + 1] - x_[i];
                a[i] = h0 / 6.0;
                b[i] = (h0 + h1) / 3.0;
                c[i] = h1 / 6.0;
                d[i] = (v_[i + 1] - v_[i]) / h1 - (v_[i] - v_[i - 1]) / h0;
            }
        }
        for (std::size_t i = 1; i < n; ++i) {
            const double w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            d[i] -= w * d[i - 1];
        }
        m_.assign(n, 0.0);
        m_[n - 1] = d[n - 1] / b[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
    }

    void compute_bounds() {
        for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
            constexpr int kSamples = 64;
            for (int s = 0; s <= kSamples; ++s) {
                const double x = x_[i] + (x_[i + 1] - x_[i]) * s / kSamples;
                for (int k = 0; k < 3; ++k) bounds_[k] = std::max(bounds_[k], std::abs(eval(x, k)));
            }
        }
    }

    std::vector<double> x_, v_, m_;
    double bounds_[3] = {0.0, 0.0, 0.0};
};

struct SingleSitePotential {
    double p = 2.0;
    Perturbation perturbation;
    double domain_cut = 60.0;

    SingleSitePotential() = default;
    explicit SingleSitePotential(double exponent, Perturbation pert = {}, double cut = 60.0)
        : p(exponent), perturbation(std::move(pert)), domain_cut(cut) {
        require(p >= 2.0, "potential exponent must satisfy p >= 2");
        require(domain_cut > 0.0, "domain_cut must be positive");
    }

    static SingleSitePotential gaussian() { return SingleSitePotential(2.0); }
    static SingleSitePotential quartic() { return SingleSitePotential(4.0); }

    bool is_gaussian() const noexcept { return p == 2.0 && perturbation.empty(); }

    double value(double x) const noexcept { return main_term(x, 0) + perturbation.eval(x, 0); }
    double d1(double x) const noexcept { return main_term(x, 1) + perturbation.eval(x, 1); }
    double d2(double x) const noexcept { return main_term(x, 2) + perturbation.eval(x, 2); }

private:
    double main_term(double x, int order) const noexcept {
        const double ax = std::abs(x);
        if (p == 2.0) {
            return order == 0 ? 0.5 * x * x : order == 1 ? x : 1.0;
        }
        if (p == 4.0) {
            const double x2 = x * x;
            return order == 0 ? 0.25 * x2 * x2 : order == 1 ? x2 * x : 3.0 * x2;
        }
        switch (order) {
            case 0: return std::pow(ax, p) / p;
            case 1: return std::copysign(std::pow(ax, p - 1.0), x);
            default: return (p - 1.0) * std::pow(ax, p - 2.0);
        }
    }
};

// psi, psi' or psi'' at x.
inline double eval_psi(const SingleSitePotential& pot, double x, int order) {
    require(order >= 0 && order <= 2, "eval_psi order must be 0, 1 or 2");
    switch (order) {
        case 0: return pot.value(x);
        case 1: return pot.d1(x);
        default: return pot.d2(x);
    }
}

namespace detail {

// Support window of x -> exp(sigma x - psi(x)) outside of which the integrand
// is below 1e-16 of its maximum.
struct SiteWindow {
    double center = 0.0;  // approximate argmax
    double shift = 0.0;   // log of the integrand at the center
    double lo = 0.0;
    double hi = 0.0;
};

inline double log_integrand(const SingleSitePotential& pot, double sigma, double x) {
    return sigma * x - pot.value(x);
}

inline SiteWindow site_window(const SingleSitePotential& pot, double sigma) {
    // Root of psi'(x) = sigma, bracketed using the perturbation bound.
    const double b1 = pot.perturbation.bound(1);
    auto inv_main = [&](double s) { return std::copysign(std::pow(std::abs(s), 1.0 / (pot.p - 1.0)), s); };
    double lo = inv_main(sigma - b1) - 1.0;
    double hi = inv_main(sigma + b1) + 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (pot.d1(mid) < sigma) lo = mid; else hi = mid;
    }
    SiteWindow w;
    w.center = 0.5 * (lo + hi);
    w.shift = log_integrand(pot, sigma, w.center);
    if (!pot.perturbation.empty()) {
        // psi' may be non-monotone: scan the bracket for the true maximum.
        const double a = inv_main(sigma - b1) - 1.0;
        const double b = inv_main(sigma + b1) + 1.0;
        for (int s = 0; s <= 400; ++s) {
            const double x = a + (b - a) * s / 400.0;
            const double g = log_integrand(pot, sigma, x);
            if (g > w.shift) { w.shift = g; w.center = x; }
        }
    }
    const double cutoff = std::log(1e-16) - 2.0;
    auto walk = [&](double dir) {
        double step = 0.25;
        double x = w.center;
        for (;;) {
            x += dir * step;
            if (std::abs(x - w.center) > pot.domain_cut)
                fail(ErrorCode::TailNotNegligible,
                     "integrand not negligible within domain_cut for sigma=" + std::to_string(sigma));
            if (log_integrand(pot, sigma, x) - w.shift < cutoff) return x;
            step *= 1.5;
        }
    };
    w.lo = walk(-1.0);
    w.hi = walk(+1.0);
    return w;
}

}  // namespace detail

// Log-partition and the first two cumulants of mu^sigma.
struct SiteMoments {
    double log_z = 0.0;  // Lambda(sigma) = log int exp(sigma x - psi(x)) dx
    double mean = 0.0;   // Lambda'(sigma)
    double var = 0.0;    // Lambda''(sigma)
};

inline SiteMoments site_moments(const SingleSitePotential& pot, double sigma) {
    using boost::math::quadrature::gauss;
    const auto w = detail::site_window(pot, sigma);
    // Split at the spline knots (the third derivative jumps there), then use a
    // fixed composite Gauss rule: the pieces are analytic, and z1 is near zero
    // by construction, so an adaptive relative tolerance would never settle.
    std::vector<double> cuts{w.lo, w.center, w.hi};
    for (double k : pot.perturbation.knots_x())
        if (k > w.lo && k < w.hi) cuts.push_back(k);
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> merged{cuts.front()};
    for (std::size_t i = 1; i < cuts.size(); ++i)
        if (cuts[i] - merged.back() > 1e-9 * (w.hi - w.lo)) merged.push_back(cuts[i]);
    merged.back() = w.hi;
    constexpr double kPanels = 96.0;
    auto density = [&](double x) { return std::exp(detail::log_integrand(pot, sigma, x) - w.shift); };
    double z0 = 0.0, z1 = 0.0, z2 = 0.0;
    for (std::size_t i = 0; i + 1 < merged.size(); ++i) {
        const double a = merged[i], b = merged[i + 1];
        const auto panels = static_cast<std::size_t>(std::max(1.0, std::ceil(kPanels * (b - a) / (w.hi - w.lo))));
        const double h = (b - a) / static_cast<double>(panels);
        for (std::size_t p = 0; p < panels; ++p) {
            const double pa = a + h * static_cast<double>(p), pb = p + 1 == panels ? b : pa + h;
            z0 += gauss<double, 20>::integrate(density, pa, pb);
            z1 += gauss<double, 20>::integrate([&](double x) { return (x - w.center) * density(x); }, pa, pb);
            z2 += gauss<double, 20>::integrate([&](double x) { const double d = x - w.center; return d * d * density(x); }, pa, pb);
        }
    }

    // Tail beyond the window: exp(g(R)) / |g'(R)| relative to the bulk.
    for (double edge : {w.lo, w.hi}) {
        const double slope = std::abs(sigma - pot.d1(edge));
        const double tail = std::exp(detail::log_integrand(pot, sigma, edge) - w.shift) / std::max(slope, 1e-300);
        if (!(tail < 1e-12 * z0))
            fail(ErrorCode::TailNotNegligible, "tail mass bound exceeds 1e-12 for sigma=" + std::to_string(sigma));
    }

    SiteMoments m;
    m.log_z = w.shift + std::log(z0);
    const double d = z1 / z0;
    m.mean = w.center + d;
    m.var = z2 / z0 - d * d;
    return m;
}

inline double log_partition(const SingleSitePotential& pot, double sigma) { return site_moments(pot, sigma).log_z; }

// Solves Lambda'(sigma) = y by Newton's method inside a bisection bracket.
inline double solve_tilt(const SingleSitePotential& pot, double y, double guess) {
    auto mean_at = [&](double s) { return site_moments(pot, s).mean; };
    double lo = guess, hi = guess;
    double step = 1.0;
    for (int it = 0; mean_at(lo) > y; ++it) {
        if (it > 200) fail(ErrorCode::NewtonDiverged, "could not bracket tilt for y=" + std::to_string(y));
        lo -= step;
        step *= 2.0;
    }
    step = 1.0;
    for (int it = 0; mean_at(hi) < y; ++it) {
        if (it > 200) fail(ErrorCode::NewtonDiverged, "could not bracket tilt for y=" + std::to_string(y));
        hi += step;
        step *= 2.0;
    }
    double s = std::clamp(guess, lo, hi);
    for (int it = 0; it < 200; ++it) {
        const auto m = site_moments(pot, s);
        const double r = m.mean - y;
        if (std::abs(r) <= 1e-14 * (1.0 + std::abs(y))) return s;
        if (r < 0.0) lo = s; else hi = s;
        double next = s - r / m.var;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (hi - lo <= 1e-15 * (1.0 + std::abs(s))) return next;
        s = next;
    }
    fail(ErrorCode::NewtonDiverged, "Newton iteration for the tilt did not converge at y=" + std::to_string(y));
}

// Tabulated phi, phi', phi'' on a uniform grid of mean-spin values. Immutable
// once built; lookups use cubic Hermite interpolation with the exact
// derivative data stored in the table.
class FreeEnergyTable {
public:
    std::vector<double> y_grid;
    std::vector<double> phi;
    std::vector<double> phi_prime;
    std::vector<double> phi_second;
    std::vector<double> sigma_of_y;

    double y_min() const noexcept { return y_grid.front(); }
    double y_max() const noexcept { return y_grid.back(); }
    bool contains(double y) const noexcept { return y >= y_min() - slack() && y <= y_max() + slack(); }

    double value(double y) const { return hermite(y, phi, phi_prime, 0); }
    double d1(double y) const { return hermite(y, phi_prime, phi_second, 0); }
    double d2(double y) const {
        const auto [i, s] = locate(y);
        return (1.0 - s) * phi_second[i] + s * phi_second[i + 1];
    }

    double max_d2(double lo, double hi) const {
        double r = 0.0;
        for (std::size_t i = 0; i < y_grid.size(); ++i)
            if (y_grid[i] >= lo - step() && y_grid[i] <= hi + step()) r = std::max(r, phi_second[i]);
        if (r == 0.0) r = std::max(d2(std::clamp(lo, y_min(), y_max())), d2(std::clamp(hi, y_min(), y_max())));
        return r;
    }

    double step() const noexcept { return (y_max() - y_min()) / static_cast<double>(y_grid.size() - 1); }

private:
    double slack() const noexcept { return 1e-12 * (1.0 + std::abs(y_max()) + std::abs(y_min())); }

    std::pair<std::size_t, double> locate(double y) const {
        if (!contains(y))
            fail(ErrorCode::OutOfTableRange, "y=" + std::to_string(y) + " outside free-energy table [" +
                                                 std::to_string(y_min()) + ", " + std::to_string(y_max()) + "]");
        const double h = step();
        const double u = (std::clamp(y, y_min(), y_max()) - y_min()) / h;
        std::size_t i = static_cast<std::size_t>(u);
        if (i >= y_grid.size() - 1) i = y_grid.size() - 2;
        return {i, u - static_cast<double>(i)};
    }

    double hermite(double y, const std::vector<double>& f, const std::vector<double>& df, int) const {
        const auto [i, s] = locate(y);
        const double h = step();
        const double s2 = s * s, s3 = s2 * s;
        const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
        const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
        return h00 * f[i] + h10 * h * df[i] + h01 * f[i + 1] + h11 * h * df[i + 1];
    }
};

inline FreeEnergyTable build_free_energy(const SingleSitePotential& pot, double y_min, double y_max, std::size_t n_grid) {
    require(y_min < y_max, "build_free_energy needs y_min < y_max");
    require(n_grid >= 3, "build_free_energy needs n_grid >= 3");
    FreeEnergyTable t;
    t.y_grid.resize(n_grid);
    t.phi.resize(n_grid);
    t.phi_prime.resize(n_grid);
    t.phi_second.resize(n_grid);
    t.sigma_of_y.resize(n_grid);
    double guess = pot.d1(y_min);
    for (std::size_t i = 0; i < n_grid; ++i) {
        const double y = y_min + (y_max - y_min) * static_cast<double>(i) / static_cast<double>(n_grid - 1);
        const double sigma = solve_tilt(pot, y, guess);
        const auto m = site_moments(pot, sigma);
        t.y_grid[i] = y;
        t.sigma_of_y[i] = sigma;
        t.phi[i] = sigma * y - m.log_z;
        t.phi_prime[i] = sigma;
        t.phi_second[i] = 1.0 / m.var;
        guess = sigma;
    }
    return t;
}

// Draws from mu^lambda by inverting the CDF of the density tabulated on a
// uniform grid (piecewise linear density, exact inversion within a cell).
class SingleSiteSampler {
public:
    SingleSiteSampler() = default;

    SingleSiteSampler(const SingleSitePotential& pot, double lambda, std::size_t cells = 4096) : lambda_(lambda) {
        const auto w = detail::site_window(pot, lambda);
        x0_ = w.lo;
        h_ = (w.hi - w.lo) / static_cast<double>(cells);
        dens_.resize(cells + 1);
        cdf_.resize(cells + 1);
        for (std::size_t j = 0; j <= cells; ++j)
            dens_[j] = std::exp(detail::log_integrand(pot, lambda, x0_ + h_ * static_cast<double>(j)) - w.shift);
        cdf_[0] = 0.0;
        for (std::size_t j = 1; j <= cells; ++j) cdf_[j] = cdf_[j - 1] + 0.5 * h_ * (dens_[j] + dens_[j - 1]);
    }

    double lambda() const noexcept { return lambda_; }

    template <class Rng>
    double operator()(Rng& rng) const {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        return invert(unif(rng));
    }

    double invert(double u) const {
        const double target = u * cdf_.back();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
        std::size_t j = it == cdf_.begin() ? 0 : static_cast<std::size_t>(it - cdf_.begin()) - 1;
        if (j >= dens_.size() - 1) j = dens_.size() - 2;
        const double rem = target - cdf_[j];
        const double f0 = dens_[j], f1 = dens_[j + 1];
        const double slope = (f1 - f0) / h_;
        // f0 s + slope s^2 / 2 = rem
        double s;
        if (std::abs(slope) * h_ < 1e-12 * std::max(f0, 1e-300)) {
            s = f0 > 0.0 ? rem / f0 : 0.5 * h_;
        } else {
            const double disc = std::max(f0 * f0 + 2.0 * slope * rem, 0.0);
            s = 2.0 * rem / (f0 + std::sqrt(disc));
        }
        return x0_ + h_ * static_cast<double>(j) + std::clamp(s, 0.0, h_);
    }

    // Mean of the tabulated density (used as a cross-check of the table).
    double table_mean() const {
        double m = 0.0;
        for (std::size_t j = 0; j + 1 < dens_.size(); ++j) {
            const double a = x0_ + h_ * static_cast<double>(j);
            const double f0 = dens_[j], f1 = dens_[j + 1];
            m += h_ * (f0 * (a + h_ / 3.0) + f1 * (a + 2.0 * h_ / 3.0)) / 2.0;
        }
        return m / cdf_.back();
    }

private:
    double lambda_ = 0.0;
    double x0_ = 0.0;
    double h_ = 1.0;
    std::vector<double> dens_;
    std::vector<double> cdf_;
};

template <class Rng>
double sample_single_site(const SingleSitePotential& pot, double lambda, Rng& rng) {
    return SingleSiteSampler(pot, lambda)(rng);
}

// phi(m) by a direct Legendre solve (no table).
inline double legendre_phi(const SingleSitePotential& pot, double m) {
    const double sigma = solve_tilt(pot, m, pot.d1(m));
    return sigma * m - log_partition(pot, sigma);
}

struct CramerReport {
    std::vector<double> m_grid;
    std::vector<double> psi_k;     // constrained log-partition, -(1/K) log of the K-fold convolution at K m
    std::vector<double> phi;       // Legendre transform
    double max_deviation = 0.0;
    double richardson_error = 0.0; // |psi_K(h) - psi_K(2h)| maximised over m_grid
};

namespace detail {

// log of the K-fold self-convolution of exp(-psi), evaluated on s = K m.
inline std::vector<double> constrained_log_partition(const SingleSitePotential& pot, int k, double h,
                                                     const std::vector<double>& m_grid) {
    const auto w = site_window(pot, 0.0);
    const double half = std::max(std::abs(w.lo), std::abs(w.hi));
    const long n1 = static_cast<long>(std::ceil(half / h));
    std::vector<double> f1(static_cast<std::size_t>(2 * n1 + 1));
    double shift = -std::numeric_limits<double>::infinity();
    for (long j = -n1; j <= n1; ++j) shift = std::max(shift, -pot.value(h * static_cast<double>(j)));
    for (long j = -n1; j <= n1; ++j)
        f1[static_cast<std::size_t>(j + n1)] = std::exp(-pot.value(h * static_cast<double>(j)) - shift);

    // g holds exp(log g_k - offset) on indices -n1*kk .. n1*kk.
    std::vector<double> g = f1;
    double offset = shift;
    for (int kk = 2; kk <= k; ++kk) {
        const long ng = static_cast<long>(g.size() - 1) / 2;
        const long nn = ng + n1;
        std::vector<double> next(static_cast<std::size_t>(2 * nn + 1), 0.0);
        for (long a = -ng; a <= ng; ++a) {
            const double ga = g[static_cast<std::size_t>(a + ng)];
            if (ga == 0.0) continue;
            double* out = next.data() + (a - n1 + nn);
            for (std::size_t b = 0; b < f1.size(); ++b) out[b] += ga * f1[b];
        }
        double mx = 0.0;
        for (double& v : next) { v *= h; mx = std::max(mx, v); }
        for (double& v : next) v /= mx;
        offset += shift + std::log(mx);
        g = std::move(next);
    }
    const long ng = static_cast<long>(g.size() - 1) / 2;
    std::vector<double> out;
    for (double m : m_grid) {
        const double u = static_cast<double>(k) * m / h;
        long i = static_cast<long>(std::floor(u));
        const double s = u - static_cast<double>(i);
        // Four-point Lagrange interpolation of log g.
        double acc = 0.0;
        for (long q = -1; q <= 2; ++q) {
            const long idx = i + q;
            if (idx < -ng + 0 || idx > ng)
                fail(ErrorCode::GridTooCoarse, "K m outside the convolution support");
            const double lv = std::log(std::max(g[static_cast<std::size_t>(idx + ng)], 1e-300)) + offset;
            double wq = 1.0;
            for (long r = -1; r <= 2; ++r)
                if (r != q) wq *= (s - static_cast<double>(r)) / static_cast<double>(q - r);
            acc += wq * lv;
        }
        out.push_back(acc);
    }
    return out;
}

}  // namespace detail

// sup over m_grid of |psi_K(m) - phi(m)| with zero external field; psi_K from
// recursive convolution quadrature on a grid of step h, checked against step 2h.
inline CramerReport cramer_compare(const SingleSitePotential& pot, int k, const std::vector<double>& m_grid,
                                   double h = 0.01, double tol = 1e-8) {
    require(k >= 1 && k <= 12, "cramer_compare needs 1 <= K <= 12");
    require(!m_grid.empty(), "cramer_compare needs a non-empty m grid");
    CramerReport r;
    r.m_grid = m_grid;
    const auto fine = detail::constrained_log_partition(pot, k, h, m_grid);
    const auto coarse = detail::constrained_log_partition(pot, k, 2.0 * h, m_grid);
    for (std::size_t i = 0; i < m_grid.size(); ++i) {
        const double psi_k = -fine[i] / static_cast<double>(k);
        const double psi_k_coarse = -coarse[i] / static_cast<double>(k);
        r.richardson_error = std::max(r.richardson_error, std::abs(psi_k - psi_k_coarse));
        const double phi = legendre_phi(pot, m_grid[i]);
        r.psi_k.push_back(psi_k);
        r.phi.push_back(phi);
        r.max_deviation = std::max(r.max_deviation, std::abs(psi_k - phi));
    }
    if (r.richardson_error > tol)
        fail(ErrorCode::GridTooCoarse, "convolution grid error estimate " + std::to_string(r.richardson_error) +
                                           " exceeds tolerance " + std::to_string(tol));
    return r;
}

}  // namespace kawasaki
