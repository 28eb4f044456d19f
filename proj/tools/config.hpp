#pragma once

// Experiment configuration: a single JSON file, read into plain structs with
// every default written back, so manifest.json echoes the resolved values.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kawasaki/dynamics.hpp"
#include "kawasaki/grid.hpp"
#include "kawasaki/lattice.hpp"
#include "kawasaki/potential.hpp"
#include "kawasaki/random.hpp"

namespace kawasaki::cli {

using nlohmann::json;

// Anything wrong with the configuration or the command line: exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A config object being read. Keys read are recorded (with defaults) in the
// resolved copy; finish() rejects keys nobody asked for.
class Node {
public:
    Node(const json& src, json& res, std::string path) : src_(src), res_(res), path_(std::move(path)) {
        if (!src_.is_object()) throw ConfigError(where() + " must be an object");
    }

    bool has(const std::string& key) const { return src_.contains(key); }

    template <class T>
    T get(const std::string& key, const T& def) {
        used_.insert(key);
        T v = src_.contains(key) ? convert<T>(key) : def;
        res_[key] = v;
        return v;
    }

    template <class T>
    T need(const std::string& key) {
        used_.insert(key);
        if (!src_.contains(key)) throw ConfigError(where() + ": missing required key '" + key + "'");
        T v = convert<T>(key);
        res_[key] = v;
        return v;
    }

    // Raw JSON value (already validated by the caller).
    const json& raw(const std::string& key) {
        used_.insert(key);
        res_[key] = src_.at(key);
        return src_.at(key);
    }

    Node child(const std::string& key) {
        used_.insert(key);
        static const json empty = json::object();
        if (!res_.contains(key)) res_[key] = json::object();
        return Node(src_.contains(key) ? src_.at(key) : empty, res_[key], path_ + "." + key);
    }

    void finish() const {
        for (auto it = src_.begin(); it != src_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(where() + ": unknown key '" + it.key() + "'");
    }

    std::string where() const { return path_.empty() ? "config" : path_; }

private:
    template <class T>
    T convert(const std::string& key) const {
        try {
            return src_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where() + "." + key + ": wrong type");
        }
    }

    const json& src_;
    json& res_;
    std::string path_;
    std::set<std::string> used_;
};

inline void check(bool cond, const std::string& what) {
    if (!cond) throw ConfigError(what);
}

// rho(theta) = mean + sum_k [a_k cos(2 pi k theta) + b_k sin(2 pi k theta)]
struct ProfileSpec {
    double mean = 0.0;
    std::vector<std::array<double, 3>> modes;  // (k, a, b)

    double operator()(double th) const {
        double v = mean;
        for (const auto& [k, a, b] : modes) v += a * std::cos(kTwoPi * k * th) + b * std::sin(kTwoPi * k * th);
        return v;
    }
    double derivative(double th) const {
        double v = 0.0;
        for (const auto& [k, a, b] : modes)
            v += kTwoPi * k * (-a * std::sin(kTwoPi * k * th) + b * std::cos(kTwoPi * k * th));
        return v;
    }
    std::function<double(double)> fn() const {
        return [s = *this](double th) { return s(th); };
    }
};

inline ProfileSpec read_profile_spec(Node n) {
    ProfileSpec p;
    p.mean = n.get<double>("mean", 0.0);
    const auto modes = n.get<std::vector<std::vector<double>>>("modes", {});
    for (const auto& m : modes) {
        check(m.size() == 3, n.where() + ".modes entries must be [k, cos_coeff, sin_coeff]");
        check(m[0] >= 1.0 && m[0] == std::floor(m[0]), n.where() + ".modes wave numbers must be positive integers");
        p.modes.push_back({m[0], m[1], m[2]});
    }
    n.finish();
    return p;
}

inline SingleSitePotential read_potential(Node n) {
    const double p = n.get<double>("p", 2.0);
    const auto knots = n.get<std::vector<std::vector<double>>>("perturbation", {});
    std::vector<std::pair<double, double>> kv;
    for (const auto& k : knots) {
        check(k.size() == 2, "potential.perturbation entries must be [knot, value]");
        kv.emplace_back(k[0], k[1]);
    }
    n.finish();
    return SingleSitePotential(p, Perturbation(kv));
}

struct TableSpec {
    double y_min = -3.0, y_max = 3.0;
    std::size_t n_grid = 121;
};

inline TableSpec read_table(Node n) {
    TableSpec t;
    t.y_min = n.get<double>("y_min", t.y_min);
    t.y_max = n.get<double>("y_max", t.y_max);
    t.n_grid = n.get<std::size_t>("n_grid", t.n_grid);
    check(t.y_max > t.y_min && t.n_grid >= 3, "table needs y_min < y_max and n_grid >= 3");
    n.finish();
    return t;
}

// Conductance streams sit far from the replica indices.
inline constexpr std::uint64_t kFieldStream = 0xF1E1D0000000ULL;

struct ModelBlock {
    ModelKind kind = ModelKind::classical;
    std::size_t n = 64;
    std::string law = "constant";
    double kappa = 1.0, lo = 1.0, hi = 2.0;
    std::vector<double> values;
    BondFunction bond;
    double c_stab = 0.1, blowup = 1e3;

    // Model at lattice size n; the quenched field uses stream derive_seed(seed, kFieldStream + n).
    ModelSpec build(const SingleSitePotential& pot, std::size_t size, std::uint64_t seed) const {
        ModelSpec m;
        switch (kind) {
            case ModelKind::classical: m = ModelSpec::classical(pot, size); break;
            case ModelKind::nongradient: m = ModelSpec::nongradient(pot, bond, size); break;
            case ModelKind::random_env: {
                ConductanceField f;
                if (law == "constant") {
                    f = ConductanceField::constant(size, kappa);
                } else if (law == "uniform") {
                    Rng rng = make_rng(seed, kFieldStream + size);
                    f = ConductanceField::iid_uniform(size, lo, hi, rng);
                } else {
                    require(values.size() == size, "model.conductance.values must have one entry per bond");
                    double c = 1.0;
                    for (double v : values) {
                        require(v > 0.0, "conductances must be positive");
                        c = std::max({c, v, 1.0 / v});
                    }
                    f = ConductanceField::from_values(values, c);
                }
                m = ModelSpec::random_env(pot, std::move(f));
                break;
            }
        }
        m.c_stab = c_stab;
        m.blowup = blowup;
        return m;
    }
};

inline ModelBlock read_model(Node n) {
    ModelBlock m;
    const auto kind = n.get<std::string>("kind", "classical");
    if (kind == "classical") m.kind = ModelKind::classical;
    else if (kind == "random_env") m.kind = ModelKind::random_env;
    else if (kind == "nongradient") m.kind = ModelKind::nongradient;
    else throw ConfigError("model.kind must be classical, random_env or nongradient");
    m.n = n.get<std::size_t>("n", m.n);
    check(m.n >= 2, "model.n must be at least 2");
    m.c_stab = n.get<double>("c_stab", m.c_stab);
    m.blowup = n.get<double>("blowup", m.blowup);
    check(m.c_stab > 0.0 && m.blowup > 0.0, "model.c_stab and model.blowup must be positive");
    if (m.kind == ModelKind::random_env) {
        auto c = n.child("conductance");
        m.law = c.get<std::string>("law", "uniform");
        if (m.law == "constant") {
            m.kappa = c.get<double>("kappa", 1.0);
            check(m.kappa > 0.0, "model.conductance.kappa must be positive");
        } else if (m.law == "uniform") {
            m.lo = c.get<double>("lo", 1.0);
            m.hi = c.get<double>("hi", 2.0);
            check(0.0 < m.lo && m.lo <= m.hi, "model.conductance needs 0 < lo <= hi");
        } else if (m.law == "values") {
            m.values = c.need<std::vector<double>>("values");
        } else {
            throw ConfigError("model.conductance.law must be constant, uniform or values");
        }
        c.finish();
    }
    if (m.kind == ModelKind::nongradient || n.has("bond_function")) {
        auto b = n.child("bond_function");
        m.bond.base = b.get<double>("base", 1.0);
        m.bond.amplitude = b.get<double>("amplitude", 0.5);
        m.bond.width = b.get<double>("width", 1.0);
        check(m.bond.lower() > 0.0 && m.bond.width > 0.0, "model.bond_function must stay positive with width > 0");
        b.finish();
    }
    n.finish();
    return m;
}

struct TimeSpec {
    double t_end = 0.1;
    std::optional<double> dt;  // default c_stab / (2 N^2)
    std::size_t intervals = 10;

    double dt_for(std::size_t n, double c_stab) const {
        const double nd = static_cast<double>(n);
        return dt.value_or(0.5 * c_stab / (nd * nd));
    }
};

inline TimeSpec read_time(Node n) {
    TimeSpec t;
    t.t_end = n.get<double>("t_end", t.t_end);
    if (n.has("dt")) t.dt = n.need<double>("dt");
    t.intervals = n.get<std::size_t>("snapshots", t.intervals);
    check(t.t_end > 0.0 && t.intervals >= 1, "time needs t_end > 0 and snapshots >= 1");
    check(!t.dt || *t.dt > 0.0, "time.dt must be positive");
    n.finish();
    return t;
}

}  // namespace kawasaki::cli
