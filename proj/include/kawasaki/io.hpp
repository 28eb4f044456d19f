#pragma once

// CSV and JSON serialisation. Numbers are written with %.17g so files
// round-trip and repeat byte for byte.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynamics.hpp"
#include "error.hpp"
#include "functionals.hpp"
#include "grid.hpp"
#include "homogenize.hpp"
#include "potential.hpp"

namespace kawasaki::io {

using nlohmann::json;

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path), path_(path) {
        if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
        row_strings(header);
    }

    template <class... T>
    void row(const T&... v) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(v), first = false), ...);
        out_ << '\n';
    }

    void row_strings(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    static std::string cell(double v) { return fmt(v); }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    template <class I>
        requires std::is_integral_v<I>
    static std::string cell(I v) {
        return std::to_string(v);
    }

    std::ofstream out_;
    std::filesystem::path path_;
};

inline void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

// columns: t, theta, rho
inline void write_profile(const std::filesystem::path& path, const SpaceTimeProfile& p) {
    CsvWriter w(path, {"t", "theta", "rho"});
    for (std::size_t k = 0; k < p.n_times(); ++k)
        for (std::size_t j = 0; j < p.frames[k].size(); ++j) w.row(p.times[k], p.frames[k].theta(j), p.frames[k][j]);
}

// columns: theta, value
inline void write_grid_function(const std::filesystem::path& path, const GridFunction& g) {
    CsvWriter w(path, {"theta", "value"});
    for (std::size_t j = 0; j < g.size(); ++j) w.row(g.theta(j), g[j]);
}

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, std::vector<std::string>& header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        if (first) {
            header = std::move(cells);
            first = false;
        } else {
            rows.push_back(std::move(cells));
        }
    }
    return rows;
}

inline double to_double(const std::string& s, const std::filesystem::path& path) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw std::runtime_error("bad number '" + s + "' in " + path.string());
    return v;
}

}  // namespace detail

// Reads a (t, theta, rho) CSV. Rows of one time must be contiguous, theta
// ascending on the uniform grid j / M.
inline SpaceTimeProfile read_profile(const std::filesystem::path& path) {
    std::vector<std::string> header;
    const auto rows = detail::read_csv(path, header);
    if (header != std::vector<std::string>{"t", "theta", "rho"})
        throw std::runtime_error(path.string() + ": expected columns t,theta,rho");
    SpaceTimeProfile p;
    std::vector<double> cur;
    double cur_t = 0.0;
    auto flush = [&] {
        if (cur.empty()) return;
        if (!p.frames.empty() && cur.size() != p.frames.front().size())
            throw std::runtime_error(path.string() + ": frames have different sizes");
        p.times.push_back(cur_t);
        p.frames.emplace_back(cur);
        cur.clear();
    };
    for (const auto& r : rows) {
        if (r.size() != 3) throw std::runtime_error(path.string() + ": expected 3 columns per row");
        const double t = detail::to_double(r[0], path), th = detail::to_double(r[1], path),
                     v = detail::to_double(r[2], path);
        if (!cur.empty() && t != cur_t) flush();
        if (cur.empty()) cur_t = t;
        cur.push_back(v);
        (void)th;
    }
    flush();
    if (p.frames.empty()) throw std::runtime_error(path.string() + ": no rows");
    const std::size_t m = p.frames.front().size();
    for (std::size_t k = 0; k < p.n_times(); ++k) {
        if (k > 0 && !(p.times[k] > p.times[k - 1])) throw std::runtime_error(path.string() + ": times must increase");
    }
    // theta must match j / M
    std::size_t j = 0;
    for (const auto& r : rows) {
        const double th = detail::to_double(r[1], path);
        if (std::abs(th - static_cast<double>(j % m) / static_cast<double>(m)) > 1e-9)
            throw std::runtime_error(path.string() + ": theta column is not the uniform grid j/M");
        ++j;
    }
    return p;
}

inline json to_json(const RateReport& r) {
    return json{{"initial_term", r.initial_term},
                {"kinetic_term", r.kinetic_term},
                {"total", r.total},
                {"per_time", r.per_time}};
}

// columns: y, phi, phi_prime, phi_second, sigma
inline void write_free_energy(const std::filesystem::path& path, const FreeEnergyTable& t) {
    CsvWriter w(path, {"y", "phi", "phi_prime", "phi_second", "sigma"});
    for (std::size_t i = 0; i < t.y_grid.size(); ++i)
        w.row(t.y_grid[i], t.phi[i], t.phi_prime[i], t.phi_second[i], t.sigma_of_y[i]);
}

// columns: replica, time, site, value
inline void write_trajectories(const std::filesystem::path& path, const std::vector<Trajectory>& ens) {
    CsvWriter w(path, {"replica", "time", "site", "value"});
    for (std::size_t r = 0; r < ens.size(); ++r)
        for (std::size_t k = 0; k < ens[r].states.size(); ++k)
            for (std::size_t i = 0; i < ens[r].states[k].n(); ++i) w.row(r, ens[r].times[k], i, ens[r].states[k].values[i]);
}

// columns: replica, cost
inline void write_costs(const std::filesystem::path& path, const std::vector<Trajectory>& ens) {
    CsvWriter w(path, {"replica", "cost"});
    for (std::size_t r = 0; r < ens.size(); ++r) w.row(r, ens[r].girsanov_cost);
}

// columns: y, k, a_F_best, mc_se
inline void write_ahat(const std::filesystem::path& path, const std::vector<AhatEntry>& entries) {
    CsvWriter w(path, {"y", "k", "a_F_best", "mc_se"});
    for (const auto& e : entries) w.row(e.y, e.k, e.value, e.se);
}

}  // namespace kawasaki::io
