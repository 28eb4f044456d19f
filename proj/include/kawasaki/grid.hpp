#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "error.hpp"

namespace kawasaki {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Periodic grid function on the unit torus. Node j sits at theta_j = j/M and
// stands for the cell [theta_j - 1/(2M), theta_j + 1/(2M)).
class GridFunction {
public:
    GridFunction() = default;
    explicit GridFunction(std::size_t m, double fill = 0.0) : values_(m, fill) {}
    explicit GridFunction(std::vector<double> values) : values_(std::move(values)) {}

    template <class F>
    static GridFunction sample(std::size_t m, F&& f) {
        GridFunction g(m);
        for (std::size_t j = 0; j < m; ++j) g.values_[j] = f(g.theta(j));
        return g;
    }

    std::size_t size() const noexcept { return values_.size(); }
    double theta(std::size_t j) const noexcept { return static_cast<double>(j) / static_cast<double>(size()); }

    double& operator[](std::size_t j) noexcept { return values_[j]; }
    double operator[](std::size_t j) const noexcept { return values_[j]; }

    // Periodic access with any integer index.
    double at(long j) const noexcept {
        const long m = static_cast<long>(size());
        long k = j % m;
        if (k < 0) k += m;
        return values_[static_cast<std::size_t>(k)];
    }

    double mean() const noexcept {
        if (values_.empty()) return 0.0;
        return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(size());
    }

    double min() const noexcept;
    double max() const noexcept;

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    const std::vector<double>& vec() const noexcept { return values_; }

    GridFunction operator-(const GridFunction& o) const {
        require(o.size() == size(), "grid size mismatch");
        GridFunction r(size());
        for (std::size_t j = 0; j < size(); ++j) r.values_[j] = values_[j] - o.values_[j];
        return r;
    }
    GridFunction operator+(const GridFunction& o) const {
        require(o.size() == size(), "grid size mismatch");
        GridFunction r(size());
        for (std::size_t j = 0; j < size(); ++j) r.values_[j] = values_[j] + o.values_[j];
        return r;
    }
    GridFunction operator*(double c) const {
        GridFunction r(size());
        for (std::size_t j = 0; j < size(); ++j) r.values_[j] = c * values_[j];
        return r;
    }

    GridFunction centered() const {
        GridFunction r(*this);
        const double mu = mean();
        for (auto& v : r.values_) v -= mu;
        return r;
    }

private:
    std::vector<double> values_;
};

inline double GridFunction::min() const noexcept {
    double r = values_.empty() ? 0.0 : values_[0];
    for (double v : values_) r = std::min(r, v);
    return r;
}

inline double GridFunction::max() const noexcept {
    double r = values_.empty() ? 0.0 : values_[0];
    for (double v : values_) r = std::max(r, v);
    return r;
}

// rho(t, theta) stored as one GridFunction per time node.
struct SpaceTimeProfile {
    std::vector<double> times;
    std::vector<GridFunction> frames;

    std::size_t m_grid() const noexcept { return frames.empty() ? 0 : frames.front().size(); }
    std::size_t n_times() const noexcept { return times.size(); }

    template <class F>
    static SpaceTimeProfile sample(std::span<const double> t_grid, std::size_t m, F&& f) {
        SpaceTimeProfile p;
        p.times.assign(t_grid.begin(), t_grid.end());
        for (double t : p.times) p.frames.push_back(GridFunction::sample(m, [&](double th) { return f(t, th); }));
        return p;
    }
};

// Control h(t, theta).
using SpaceTimeFn = std::function<double(double, double)>;

inline std::vector<double> uniform_times(double t_end, std::size_t intervals) {
    std::vector<double> t(intervals + 1);
    for (std::size_t k = 0; k <= intervals; ++k)
        t[k] = t_end * static_cast<double>(k) / static_cast<double>(intervals);
    return t;
}

// Trapezoid rule on an arbitrary (sorted) node set.
inline double trapezoid(std::span<const double> t, std::span<const double> f) {
    double s = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k) s += 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
    return s;
}

}  // namespace kawasaki
