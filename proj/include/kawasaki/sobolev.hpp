#pragma once

// Dual Sobolev norms on the unit torus for grid functions, which are read as
// samples of band-limited trigonometric interpolants. On an even grid the
// Nyquist mode is not seen by the first-derivative operator and is discarded.

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "error.hpp"
#include "grid.hpp"

namespace kawasaki {

class SpectralOperator {
public:
    explicit SpectralOperator(std::size_t m) : m_(m), d1_(m, m), cos_(m), sin_(m) {
        require(m >= 3, "spectral grid needs at least 3 points");
        const double md = static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (i == j) { d1_(i, j) = 0.0; continue; }
                const long k = static_cast<long>(i) - static_cast<long>(j);
                const double sign = (k % 2 == 0) ? 1.0 : -1.0;
                const double arg = kPi * static_cast<double>(k) / md;
                d1_(i, j) = kPi * sign * (m % 2 == 0 ? 1.0 / std::tan(arg) : 1.0 / std::sin(arg));
            }
        }
        for (std::size_t j = 0; j < m; ++j) {
            cos_[j] = std::cos(kTwoPi * static_cast<double>(j) / md);
            sin_[j] = std::sin(kTwoPi * static_cast<double>(j) / md);
        }
        Eigen::MatrixXd k = d1_.transpose() * d1_ + null_projector();
        llt_.compute(k);
        if (llt_.info() != Eigen::Success) fail(ErrorCode::SolverSingular, "spectral Laplacian factorisation failed");
    }

    // Shared instance per grid size.
    static std::shared_ptr<const SpectralOperator> get(std::size_t m) {
        static std::mutex mu;
        static std::map<std::size_t, std::shared_ptr<const SpectralOperator>> cache;
        std::lock_guard<std::mutex> lock(mu);
        auto& slot = cache[m];
        if (!slot) slot = std::make_shared<const SpectralOperator>(m);
        return slot;
    }

    std::size_t size() const noexcept { return m_; }
    const Eigen::MatrixXd& d1() const noexcept { return d1_; }

    std::vector<double> derivative(const std::vector<double>& u) const {
        check(u);
        Eigen::Map<const Eigen::VectorXd> uv(u.data(), static_cast<Eigen::Index>(m_));
        Eigen::VectorXd r = d1_ * uv;
        return {r.data(), r.data() + r.size()};
    }

    // Removes the mean and (even grids) the Nyquist component.
    std::vector<double> project(const std::vector<double>& u) const {
        check(u);
        double mean = 0.0, nyq = 0.0;
        for (std::size_t j = 0; j < m_; ++j) {
            mean += u[j];
            nyq += (j % 2 == 0 ? u[j] : -u[j]);
        }
        mean /= static_cast<double>(m_);
        nyq /= static_cast<double>(m_);
        std::vector<double> r(u);
        for (std::size_t j = 0; j < m_; ++j) {
            r[j] -= mean;
            if (m_ % 2 == 0) r[j] -= (j % 2 == 0 ? nyq : -nyq);
        }
        return r;
    }

    // ||u||^2_{H^-1} by solving D1^T D1 v = u and returning (1/M) sum u v.
    double hminus1_by_solve(const std::vector<double>& u) const {
        const auto up = project(u);
        Eigen::Map<const Eigen::VectorXd> uv(up.data(), static_cast<Eigen::Index>(m_));
        const Eigen::VectorXd v = llt_.solve(uv);
        return uv.dot(v) / static_cast<double>(m_);
    }

    // ||u||^2_{H^-1} = sum_{k != 0} |u_k|^2 / (2 pi k)^2 from the DFT.
    double hminus1_by_fourier(const std::vector<double>& u) const {
        check(u);
        const std::size_t kmax = (m_ % 2 == 0) ? m_ / 2 - 1 : (m_ - 1) / 2;
        double s = 0.0;
        for (std::size_t k = 1; k <= kmax; ++k) {
            double re = 0.0, im = 0.0;
            for (std::size_t j = 0; j < m_; ++j) {
                const std::size_t idx = (k * j) % m_;
                re += u[j] * cos_[idx];
                im -= u[j] * sin_[idx];
            }
            re /= static_cast<double>(m_);
            im /= static_cast<double>(m_);
            const double w = kTwoPi * static_cast<double>(k);
            s += 2.0 * (re * re + im * im) / (w * w);
        }
        return s;
    }

    // sup_v 2<u,v> - <w v', v'> by solving D1^T W D1 v = u.
    double weighted_hminus1(const std::vector<double>& u, const std::vector<double>& w) const {
        check(u);
        check(w);
        Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(m_));
        Eigen::MatrixXd k = d1_.transpose() * wv.asDiagonal() * d1_ + null_projector();
        Eigen::LLT<Eigen::MatrixXd> llt(k);
        if (llt.info() != Eigen::Success) fail(ErrorCode::SolverSingular, "weighted elliptic operator not positive");
        const auto up = project(u);
        Eigen::Map<const Eigen::VectorXd> uv(up.data(), static_cast<Eigen::Index>(m_));
        const Eigen::VectorXd v = llt.solve(uv);
        return uv.dot(v) / static_cast<double>(m_);
    }

private:
    void check(const std::vector<double>& u) const { require(u.size() == m_, "grid size mismatch in spectral operator"); }

    Eigen::MatrixXd null_projector() const {
        const auto md = static_cast<Eigen::Index>(m_);
        Eigen::VectorXd one = Eigen::VectorXd::Ones(md);
        Eigen::MatrixXd p = one * one.transpose() / static_cast<double>(m_);
        if (m_ % 2 == 0) {
            Eigen::VectorXd z(md);
            for (Eigen::Index j = 0; j < md; ++j) z[j] = (j % 2 == 0) ? 1.0 : -1.0;
            p += z * z.transpose() / static_cast<double>(m_);
        }
        return p;
    }

    std::size_t m_;
    Eigen::MatrixXd d1_;
    std::vector<double> cos_, sin_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

namespace detail {
inline void require_mean_zero(const GridFunction& u) {
    double scale = 1.0;
    for (double v : u.values()) scale = std::max(scale, std::abs(v));
    if (std::abs(u.mean()) > 1e-10 * scale)
        fail(ErrorCode::NotMeanZero, "input has mean " + std::to_string(u.mean()));
}
}  // namespace detail

// Squared H^-1 norm of a mean-zero grid function. The elliptic solve is the
// result; the Fourier sum is evaluated alongside and must agree.
inline double hminus1_norm(const GridFunction& u) {
    detail::require_mean_zero(u);
    const auto op = SpectralOperator::get(u.size());
    const double by_solve = op->hminus1_by_solve(u.vec());
    const double by_fourier = op->hminus1_by_fourier(u.vec());
    if (std::abs(by_solve - by_fourier) > 1e-8 * std::max(1.0, std::abs(by_solve)))
        fail(ErrorCode::CrossCheckFailed, "H^-1 solve " + std::to_string(by_solve) + " vs Fourier " +
                                              std::to_string(by_fourier));
    return by_solve;
}

// Squared norm sup_v 2 int u v - int w (v')^2 for a positive weight w.
inline double weighted_hminus1_norm(const GridFunction& u, const GridFunction& w) {
    detail::require_mean_zero(u);
    require(w.size() == u.size(), "weight and input sizes differ");
    if (!(w.min() > 0.0)) fail(ErrorCode::SolverSingular, "weight must be bounded below by a positive constant");
    return SpectralOperator::get(u.size())->weighted_hminus1(u.vec(), w.vec());
}

inline GridFunction spectral_derivative(const GridFunction& u) {
    return GridFunction(SpectralOperator::get(u.size())->derivative(u.vec()));
}

}  // namespace kawasaki
