// Configuration-driven experiment runner.
//
//   kawasaki <subcommand> --config c.json [--out dir] [--seed s] [--replicas r] [--threads t]
//
// Exit codes: 0 success, 1 configuration error, 2 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "kawasaki/dynamics.hpp"
#include "kawasaki/functionals.hpp"
#include "kawasaki/homogenize.hpp"
#include "kawasaki/hydro.hpp"
#include "kawasaki/io.hpp"
#include "kawasaki/ldplab.hpp"
#include "kawasaki/potential.hpp"
#include "kawasaki/sobolev.hpp"

namespace fs = std::filesystem;
using namespace kawasaki;
using namespace kawasaki::cli;

namespace {

struct Flags {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicas;
    unsigned threads = 1;
    std::string profile;  // rate only
};

// Shared state of one run: the parsed config, its resolved echo, and the
// files written so far.
struct Run {
    std::string command;
    Flags flags;
    json src;
    json resolved = json::object();
    std::optional<Node> root;
    std::uint64_t seed = 0;
    std::size_t replicas = 1;
    fs::path out;
    std::vector<std::string> outputs;
    json seeds = json::object();

    fs::path file(const std::string& name) {
        outputs.push_back(name);
        return out / name;
    }
};

const std::vector<std::string> kTopLevel = {"potential", "table", "model", "initial_profile", "time", "seed",
                                            "replicas", "simulate", "hydro", "rate", "tilt", "homogenize", "ldp",
                                            "check"};

void load(Run& run) {
    std::ifstream in(run.flags.config);
    if (!in) throw ConfigError("cannot read config file '" + run.flags.config + "'");
    try {
        run.src = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!run.src.is_object()) throw ConfigError("config must be a JSON object");
    for (auto it = run.src.begin(); it != run.src.end(); ++it)
        if (std::find(kTopLevel.begin(), kTopLevel.end(), it.key()) == kTopLevel.end())
            throw ConfigError("unknown top-level key '" + it.key() + "'");
    // blocks for other subcommands may share the file; they are neither read nor echoed
    run.root.emplace(run.src, run.resolved, "");
    run.seed = run.root->get<std::uint64_t>("seed", 0);
    run.replicas = run.root->get<std::size_t>("replicas", 4);
    if (run.flags.seed) run.seed = run.resolved["seed"] = *run.flags.seed;
    if (run.flags.replicas) run.replicas = run.resolved["replicas"] = *run.flags.replicas;
    check(run.replicas >= 1, "replicas must be at least 1");
    run.out = run.flags.out;
    fs::create_directories(run.out);
}

void write_manifest(Run& run, const json& extra = json::object()) {
    json m;
    m["subcommand"] = run.command;
    m["config"] = run.resolved;
    m["seed"] = run.seed;
    m["replicas"] = run.replicas;
    m["seeds"] = run.seeds;
    m["outputs"] = run.outputs;
    if (!extra.empty()) m["results"] = extra;
    io::write_json(run.out / "manifest.json", m);
}

FreeEnergyTable build_table(const SingleSitePotential& pot, const TableSpec& t) {
    return build_free_energy(pot, t.y_min, t.y_max, t.n_grid);
}

// The hydrodynamic coefficient implied by the model block: the harmonic mean
// of the conductance law (not of one sampled field) for quenched media.
double law_abar(const ModelBlock& mb) {
    switch (mb.kind) {
        case ModelKind::classical: return 1.0;
        case ModelKind::random_env:
            if (mb.law == "constant") return mb.kappa;
            if (mb.law == "uniform") return mb.hi == mb.lo ? mb.lo : (mb.hi - mb.lo) / std::log(mb.hi / mb.lo);
            return abar(mb.values);
        case ModelKind::nongradient: break;
    }
    throw ConfigError("the non-gradient model has no scalar abar; give an ahat table");
}

// {"y": [...], "value": [...]} or {"csv": "ahat_table.csv"} (homogenize output)
std::optional<AhatTable> read_ahat(Node& parent) {
    if (!parent.has("ahat")) return std::nullopt;
    auto n = parent.child("ahat");
    if (n.has("csv")) {
        const auto path = n.need<std::string>("csv");
        n.finish();
        std::ifstream in(path);
        check(static_cast<bool>(in), "cannot read ahat csv '" + path + "'");
        std::string line;
        std::getline(in, line);
        check(line == "y,k,a_F_best,mc_se", "ahat csv must have columns y,k,a_F_best,mc_se");
        std::vector<AhatEntry> entries;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            AhatEntry e;
            char c1, c2, c3;
            std::istringstream ss(line);
            ss >> e.y >> c1 >> e.k >> c2 >> e.value >> c3 >> e.se;
            check(static_cast<bool>(ss) && c1 == ',' && c2 == ',' && c3 == ',', "malformed ahat csv row: " + line);
            entries.push_back(e);
        }
        check(!entries.empty(), "ahat csv has no rows");
        return AhatTable(entries);
    }
    auto y = n.need<std::vector<double>>("y");
    auto v = n.need<std::vector<double>>("value");
    n.finish();
    check(!y.empty() && y.size() == v.size(), "ahat needs matching non-empty y and value arrays");
    for (std::size_t i = 1; i < y.size(); ++i) check(y[i] > y[i - 1], "ahat.y must increase");
    for (double a : v) check(a > 0.0, "ahat values must be positive");
    return AhatTable(std::move(y), std::move(v));
}

std::vector<double> snapshot_times(const TimeSpec& t) { return uniform_times(t.t_end, t.intervals); }

// ---------------------------------------------------------------- phi

void cmd_phi(Run& run) {
    auto& root = *run.root;
    const auto pot = read_potential(root.child("potential"));
    const auto ts = read_table(root.child("table"));
    const auto table = build_table(pot, ts);
    io::write_free_energy(run.file("free_energy.csv"), table);
    write_manifest(run);
}

// ---------------------------------------------------------------- simulate

void cmd_simulate(Run& run) {
    auto& root = *run.root;
    const auto pot = read_potential(root.child("potential"));
    const auto ts = read_table(root.child("table"));
    const auto mb = read_model(root.child("model"));
    const auto rho0 = read_profile_spec(root.child("initial_profile"));
    const auto time = read_time(root.child("time"));
    auto sim = root.child("simulate");
    const bool condition = sim.get<bool>("condition_mean", pot.is_gaussian());
    const std::size_t m_out = sim.get<std::size_t>("profile_grid", mb.n);
    const bool write_states = sim.get<bool>("write_states", true);
    std::optional<ProfileSpec> control;
    if (sim.has("control")) control = read_profile_spec(sim.child("control"));
    sim.finish();
    check(m_out >= 1, "simulate.profile_grid must be positive");

    const auto table = build_table(pot, ts);
    auto model = mb.build(pot, mb.n, run.seed);
    if (control) model.tilt = [c = *control](double, double th) { return c(th); };
    SimulationOptions opt{.t_end = time.t_end,
                          .dt = time.dt_for(mb.n, mb.c_stab),
                          .snapshot_times = snapshot_times(time),
                          .replicas = run.replicas,
                          .seed = run.seed,
                          .threads = run.flags.threads,
                          .condition_mean = condition};
    const auto ens = simulate(model, table, rho0.fn(), opt);

    if (write_states) io::write_trajectories(run.file("trajectories.csv"), ens);
    io::write_costs(run.file("girsanov_costs.csv"), ens);
    const auto mean = ensemble_mean_profile(ens, m_out);
    SpaceTimeProfile prof{ens.front().times, mean};
    io::write_profile(run.file("mean_profile.csv"), prof);

    double drift = 0.0, cost = 0.0;
    json seeds = json::array();
    for (const auto& tr : ens) {
        drift = std::max(drift, tr.max_mean_drift());
        cost += tr.girsanov_cost / static_cast<double>(mb.n * ens.size());
        seeds.push_back(tr.seed);
    }
    run.seeds["replicas"] = seeds;
    if (mb.kind == ModelKind::random_env && mb.law == "uniform") run.seeds["field"] = derive_seed(run.seed, kFieldStream + mb.n);
    json summary{{"n", mb.n}, {"max_mean_drift", drift}, {"mean_cost_per_n", cost}, {"replicas", ens.size()}};
    io::write_json(run.file("summary.json"), summary);
    write_manifest(run, summary);
}

// ---------------------------------------------------------------- hydro

struct HydroBlock {
    std::size_t m = 128;
    HydroOptions opt;
    std::optional<double> abar;
    std::optional<AhatTable> ahat;
    std::optional<ProfileSpec> control;
};

HydroBlock read_hydro(Node n, const TimeSpec& time) {
    HydroBlock h;
    h.m = n.get<std::size_t>("m", h.m);
    h.opt.t_end = time.t_end;
    h.opt.dt = n.get<double>("dt", 1e-5);
    h.opt.n_out = n.get<std::size_t>("n_out", time.intervals);
    h.opt.cfl = n.get<double>("cfl", h.opt.cfl);
    if (n.has("abar")) h.abar = n.need<double>("abar");
    h.ahat = read_ahat(n);
    if (n.has("control")) h.control = read_profile_spec(n.child("control"));
    n.finish();
    check(h.m >= 3 && h.opt.dt > 0.0 && h.opt.n_out >= 1, "hydro needs m >= 3, dt > 0, n_out >= 1");
    check(!h.abar || *h.abar > 0.0, "hydro.abar must be positive");
    return h;
}

SpaceTimeProfile run_hydro(const FreeEnergyTable& table, const ModelBlock& mb, const HydroBlock& hb,
                           const GridFunction& rho0, double* abar_used) {
    std::optional<SpaceTimeFn> h;
    if (hb.control) h = [c = *hb.control](double, double th) { return c(th); };
    if (hb.ahat) {
        if (abar_used) *abar_used = std::numeric_limits<double>::quiet_NaN();
        return solve_nongrad_hydro(table, *hb.ahat, rho0, hb.opt, h);
    }
    const double a = hb.abar.value_or(law_abar(mb));
    if (abar_used) *abar_used = a;
    return h ? solve_controlled(table, a, rho0, *h, hb.opt) : solve_hydro(table, a, rho0, hb.opt);
}

void cmd_hydro(Run& run) {
    auto& root = *run.root;
    const auto pot = read_potential(root.child("potential"));
    const auto ts = read_table(root.child("table"));
    const auto mb = read_model(root.child("model"));
    const auto rho0 = read_profile_spec(root.child("initial_profile"));
    const auto time = read_time(root.child("time"));
    const auto hb = read_hydro(root.child("hydro"), time);
    const auto table = build_table(pot, ts);
    double a = 0.0;
    const auto sol = run_hydro(table, mb, hb, GridFunction::sample(hb.m, rho0.fn()), &a);
    io::write_profile(run.file("hydro.csv"), sol);
    write_manifest(run, json{{"abar", hb.ahat ? json(nullptr) : json(a)}, {"n_times", sol.n_times()}});
}

// ---------------------------------------------------------------- rate

void cmd_rate(Run& run) {
    auto& root = *run.root;
    const auto pot = read_potential(root.child("potential"));
    const auto ts = read_table(root.child("table"));
    const auto mb = read_model(root.child("model"));
    const auto time = read_time(root.child("time"));
    auto rn = root.child("rate");
    std::string profile_path = run.flags.profile.empty() ? rn.get<std::string>("profile", "") : run.flags.profile;
    if (!run.flags.profile.empty()) run.resolved["rate"]["profile"] = run.flags.profile;
    const std::size_t m = rn.get<std::size_t>("m", 64);
    std::optional<ProfileSpec> m0;
    if (rn.has("m0")) m0 = read_profile_spec(rn.child("m0"));
    std::optional<double> abar_cfg;
    if (rn.has("abar")) abar_cfg = rn.need<double>("abar");
    const auto ahat = read_ahat(rn);
    rn.finish();
    std::optional<ProfileSpec> frozen;
    if (profile_path.empty()) frozen = read_profile_spec(root.child("initial_profile"));

    const auto table = build_table(pot, ts);
    SpaceTimeProfile rho;
    if (!profile_path.empty()) {
        try {
            rho = io::read_profile(profile_path);
        } catch (const std::runtime_error& e) {
            throw ConfigError(e.what());
        }
    } else {
        // the initial profile held fixed on [0, T]
        rho = SpaceTimeProfile::sample(snapshot_times(time), m, [&](double, double th) { return (*frozen)(th); });
    }
    const std::size_t mg = rho.m_grid();
    const GridFunction m0g = m0 ? GridFunction::sample(mg, m0->fn()) : GridFunction(mg, rho.frames.front().mean());
    RateReport rep;
    if (ahat) {
        rep = rate_nongradient(table, *ahat, m0g, rho);
    } else {
        rep = rate_random_env(table, abar_cfg.value_or(law_abar(mb)), m0g, rho);
    }
    const auto j = io::to_json(rep);
    io::write_json(run.file("rate_report.json"), j);
    write_manifest(run, json{{"total", rep.total}});
}

// ---------------------------------------------------------------- tilt

void cmd_tilt(Run& run) {
    auto& root = *run.root;
    const auto pot = read_potential(root.child("potential"));
    const auto ts = read_table(root.child("table"));
    const auto mb = read_model(root.child("model"));
    const auto rho0 = read_profile_spec(root.child("initial_profile"));
    const auto time = read_time(root.child("time"));
    auto tn = root.child("tilt");
    const auto control = read_profile_spec(tn.child("control"));
    const std::size_t check_m = tn.get<std::size_t>("check_m", 256);
    const double check_dt = tn.get<double>("check_dt", 0.0);
    const std::size_t check_n_out = tn.get<std::size_t>("check_n_out", 2 * check_m);
    tn.finish();

    const auto table = build_table(pot, ts);
    SpaceTimeFn h = [control](double, double th) { return control(th); };
    auto model = mb.build(pot, mb.n, run.seed);
    model.tilt = h;
    SimulationOptions opt{.t_end = time.t_end,
                          .dt = time.dt_for(mb.n, mb.c_stab),
                          .snapshot_times = {0.0, time.t_end},
                          .replicas = run.replicas,
                          .seed = run.seed,
                          .threads = run.flags.threads,
                          .condition_mean = pot.is_gaussian()};
    const auto ens = simulate(model, table, rho0.fn(), opt);
    io::write_costs(run.file("girsanov_costs.csv"), ens);

    std::vector<double> c(ens.size()), c2(ens.size());
    json seeds = json::array();
    for (std::size_t r = 0; r < ens.size(); ++r) {
        c[r] = ens[r].girsanov_cost / static_cast<double>(mb.n);
        c2[r] = c[r] * c[r];
        seeds.push_back(ens[r].seed);
    }
    run.seeds["replicas"] = seeds;
    const double rd = static_cast<double>(ens.size());
    const double mean = pairwise_sum(c) / rd;
    const double se = ens.size() > 1 ? std::sqrt(std::max(pairwise_sum(c2) / rd - mean * mean, 0.0) / (rd - 1.0)) : 0.0;

    json summary{{"mean_cost_per_n", mean}, {"se_cost_per_n", se}};
    if (mb.kind != ModelKind::nongradient) {
        const double a = law_abar(mb);
        // (1/2) int int abar h^2 on a fine grid
        const std::size_t fine = 4096;
        double s = 0.0;
        for (std::size_t j = 0; j < fine; ++j) {
            const double v = control(static_cast<double>(j) / fine);
            s += v * v / fine;
        }
        summary["analytic_half_abar_h2"] = 0.5 * a * s * time.t_end;
        const double dt = check_dt > 0.0 ? check_dt : 0.2 / (a * check_m * check_m * std::max(1.0, table.max_d2(-1e300, 1e300)));
        const auto g = girsanov_identity_check(h, a, table, GridFunction::sample(check_m, rho0.fn()),
                                               {.t_end = time.t_end, .dt = dt, .n_out = check_n_out});
        summary["identity_check"] = json{{"lhs", g.lhs}, {"rhs", g.rhs}, {"reldiff", g.reldiff}, {"m", check_m}};
    }
    io::write_json(run.file("tilt_summary.json"), summary);
    write_manifest(run, summary);
}

// ---------------------------------------------------------------- homogenize

void cmd_homogenize(Run& run) {
    auto& root = *run.root;
    const auto pot = read_potential(root.child("potential"));
    const auto ts = read_table(root.child("table"));
    const auto mb = read_model(root.child("model"));
    auto hn = root.child("homogenize");
    const auto y = hn.get<std::vector<double>>("y_grid", {-1.0, -0.5, 0.0, 0.5, 1.0});
    const int k_max = hn.get<int>("k_max", 2);
    const std::size_t samples = hn.get<std::size_t>("samples", 4000);
    AhatOptions opt;
    opt.box = hn.get<double>("box", opt.box);
    opt.max_rel_se = hn.get<double>("max_rel_se", opt.max_rel_se);
    opt.threads = run.flags.threads;
    hn.finish();
    check(!y.empty(), "homogenize.y_grid must not be empty");
    check(mb.kind == ModelKind::nongradient, "homogenize needs model.kind = nongradient");

    const auto table = build_table(pot, ts);
    const auto entries = ahat_approx(pot, table, mb.bond, y, k_max, samples, run.seed, opt);
    io::write_ahat(run.file("ahat_table.csv"), entries);
    json streams = json::array();
    for (std::size_t i = 0; i < y.size(); ++i) streams.push_back(derive_seed(run.seed, i));
    run.seeds["per_y"] = streams;
    write_manifest(run);
}

// ---------------------------------------------------------------- ldp

void cmd_ldp(Run& run) {
    auto& root = *run.root;
    const auto pot = read_potential(root.child("potential"));
    const auto ts = read_table(root.child("table"));
    const auto mb = read_model(root.child("model"));
    const auto time = read_time(root.child("time"));
    auto ln = root.child("ldp");
    const auto target_spec = read_profile_spec(ln.child("target"));
    const auto n_list = ln.get<std::vector<std::size_t>>("n_list", {16, 32, 64});
    const std::size_t m = ln.get<std::size_t>("m", 64);
    const double dt_factor = ln.get<double>("dt_factor", 0.5 * mb.c_stab);
    const double radius_factor = ln.get<double>("radius_factor", 3.0);
    const std::size_t pilot_replicas = ln.get<std::size_t>("pilot_replicas", 200);
    std::optional<double> radius;
    if (ln.has("radius")) radius = ln.need<double>("radius");
    const bool tilted = ln.get<bool>("tilted", true);
    const double min_ess = ln.get<double>("min_ess", 10.0);
    ln.finish();
    check(!n_list.empty() && m >= 3 && dt_factor > 0.0 && dt_factor <= mb.c_stab, "ldp needs N values, m >= 3, 0 < dt_factor <= c_stab");
    check(mb.kind != ModelKind::nongradient, "ldp supports the classical and random-environment models");
    check(!radius || *radius > 0.0, "ldp.radius must be positive");

    const auto table = build_table(pot, ts);
    const double a = law_abar(mb);
    const auto tgrid = snapshot_times(time);
    const auto target = SpaceTimeProfile::sample(tgrid, m, [&](double, double th) { return target_spec(th); });
    auto make = [&](std::size_t n) { return mb.build(pot, n, run.seed); };
    const double mean = target_spec.mean;
    auto flat = [mean](double) { return mean; };
    json summary;
    json field_seeds = json::object();
    if (mb.kind == ModelKind::random_env && mb.law == "uniform")
        for (std::size_t n : n_list) field_seeds[std::to_string(n)] = derive_seed(run.seed, kFieldStream + n);

    // Radius: factor x median tracking distance of a pilot at the largest N.
    const std::size_t n_max = *std::max_element(n_list.begin(), n_list.end());
    double delta = 0.0;
    if (radius) {
        delta = *radius;
    } else {
        const auto hydro = solve_hydro(table, a, GridFunction::sample(m, target_spec.fn()),
                                       {.t_end = time.t_end, .dt = 0.2 / (a * m * m * std::max(1.0, table.max_d2(-1e300, 1e300))),
                                        .n_out = time.intervals});
        const std::uint64_t pilot_seed = derive_seed(run.seed, 0x9170ULL);
        SimulationOptions po{.t_end = time.t_end, .dt = dt_factor / double(n_max * n_max), .snapshot_times = tgrid,
                             .replicas = pilot_replicas, .seed = pilot_seed, .threads = run.flags.threads,
                             .condition_mean = pot.is_gaussian()};
        const auto pilot = simulate(make(n_max), table, target_spec.fn(), po);
        const auto d = tube_distances(pilot, hydro, run.flags.threads);
        delta = calibrate_radius(d, radius_factor);
        run.seeds["pilot"] = pilot_seed;
        summary["pilot"] = json{{"n", n_max}, {"replicas", pilot_replicas}, {"median_distance", median(d)}};
    }
    summary["radius"] = delta;
    const DeviationEvent ev{target, delta};

    TubeOptions topt;
    topt.n_list = n_list;
    topt.replicas = run.replicas;
    topt.seed = run.seed;
    topt.threads = run.flags.threads;
    topt.dt_factor = dt_factor;
    topt.condition_mean = pot.is_gaussian();
    const auto direct = estimate_tube_probability(make, table, flat, ev, topt);

    io::CsvWriter tube(run.file("tube.csv"), {"n", "replicas", "hits", "p_hat", "se", "seed", "estimator"});
    std::vector<ProbabilityPoint> pts;
    std::vector<std::string> source;
    json direct_j = json::array(), tilted_j = json::array();
    json tube_seeds = json::object();
    // h = abar^-1 A[d_t rho] - d_theta phi'(rho) with d_t rho = 0 for a frozen target
    SpaceTimeFn h = [&table, target_spec](double, double th) {
        return -table.d2(target_spec(th)) * target_spec.derivative(th);
    };
    for (const auto& e : direct) {
        tube.row(e.n, e.replicas, e.hits, e.p_hat, e.se, e.seed, "direct");
        tube_seeds["direct_" + std::to_string(e.n)] = e.seed;
        direct_j.push_back(json{{"n", e.n}, {"hits", e.hits}, {"p_hat", e.p_hat}, {"se", e.se}, {"zero_hits", e.zero_hits}});
        std::optional<TiltedEstimate> t;
        if (tilted) {
            TiltedOptions o;
            o.replicas = run.replicas;
            o.seed = derive_seed(run.seed, 0x7117ULL);
            o.threads = run.flags.threads;
            o.dt_factor = dt_factor;
            o.min_ess = min_ess;
            try {
                t = tilted_estimate(make(e.n), h, table, target_spec.fn(), ev, o);
            } catch (const Error& err) {
                if (err.code() != ErrorCode::WeightDegeneracy) throw;
                tilted_j.push_back(json{{"n", e.n}, {"error", std::string(err.name())}});
            }
        }
        if (t) {
            tube.row(t->n, t->replicas, t->hits, t->p_hat, t->se, t->seed, "tilted");
            tube_seeds["tilted_" + std::to_string(t->n)] = t->seed;
            tilted_j.push_back(json{{"n", t->n},
                                    {"hits", t->hits},
                                    {"p_hat", t->p_hat},
                                    {"se", t->se},
                                    {"ess", t->ess},
                                    {"mean_log_lr_per_n", t->mean_log_lr_per_n},
                                    {"se_log_lr_per_n", t->se_log_lr_per_n},
                                    {"mean_initial_log_lr_per_n", t->mean_initial_log_lr_per_n},
                                    {"mean_cost_per_n", t->mean_cost_per_n}});
        }
        if (e.hits > 0) {
            pts.push_back({e.n, e.p_hat, e.se});
            source.push_back("direct");
        } else if (t && t->p_hat > 0.0) {
            pts.push_back({t->n, t->p_hat, t->se});
            source.push_back("tilted");
        }
    }
    run.seeds["tube"] = tube_seeds;
    if (!field_seeds.empty()) run.seeds["field"] = field_seeds;
    const auto curve = empirical_rate_curve(pts);
    io::CsvWriter cw(run.file("rate_curve.csv"), {"n", "value", "se", "estimator"});
    for (std::size_t i = 0; i < curve.size(); ++i) cw.row(curve[i].n, curve[i].value, curve[i].se, source[i]);

    const auto rep = rate_random_env(table, a, GridFunction(m, mean), target);
    summary["analytic_rate"] = io::to_json(rep);
    summary["direct"] = direct_j;
    summary["tilted"] = tilted_j;
    io::write_json(run.file("ldp_summary.json"), summary);
    write_manifest(run, json{{"radius", delta}, {"analytic_total", rep.total}});
}

// ---------------------------------------------------------------- check

struct CheckItem {
    std::string name;
    double value;
    double tol;
};

void cmd_check(Run& run) {
    auto& root = *run.root;
    auto cn = root.child("check");
    const std::size_t n = cn.get<std::size_t>("n", 32);
    const std::size_t steps = cn.get<std::size_t>("steps", 2000);
    cn.finish();
    check(n >= 4 && steps >= 1, "check needs n >= 4 and steps >= 1");

    std::vector<CheckItem> items;
    const auto gauss = SingleSitePotential::gaussian();
    const auto gt = build_free_energy(gauss, -3.0, 3.0, 121);
    double e_phi = 0.0, e_dphi = 0.0;
    for (int i = 0; i <= 600; ++i) {
        const double y = -3.0 + 0.01 * i;
        e_phi = std::max(e_phi, std::abs(gt.value(y) - (0.5 * y * y - 0.5 * std::log(kTwoPi))));
        e_dphi = std::max(e_dphi, std::abs(gt.d1(y) - y));
    }
    items.push_back({"gaussian_phi", e_phi, 1e-8});
    items.push_back({"gaussian_phi_prime", e_dphi, 1e-8});

    const auto quartic = SingleSitePotential::quartic();
    const double nd = static_cast<double>(n);
    const double dt = 0.02 / (nd * nd);
    Rng field_rng = make_rng(run.seed, kFieldStream + n);
    const std::vector<ModelSpec> models = {
        ModelSpec::classical(quartic, n),
        ModelSpec::random_env(quartic, ConductanceField::iid_uniform(n, 1.0, 2.0, field_rng)),
        ModelSpec::nongradient(quartic, BondFunction{1.0, 0.5, 1.0}, n)};
    for (const auto& model : models) {
        Rng rng = make_rng(run.seed, 1);
        std::vector<double> x(n);
        std::normal_distribution<double> g(0.2, 0.5);
        for (auto& v : x) v = g(rng);
        const double m0 = SpinConfiguration(x).empirical_mean();
        StepWork w;
        for (std::size_t k = 0; k < steps; ++k) step_model(model, x, static_cast<double>(k) * dt, dt, rng, w);
        items.push_back({std::string("conservation_") + model_name(model.kind),
                         std::abs(SpinConfiguration(x).empirical_mean() - m0), 1e-9});
    }

    Rng rng = make_rng(run.seed, 2);
    std::normal_distribution<double> g;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        GridFunction u(64);
        for (std::size_t j = 0; j < 64; ++j)
            for (int k = 1; k <= 8; ++k) u[j] += g(rng) * std::cos(kTwoPi * k * u.theta(j) + k);
        u = u.centered();
        const auto op = SpectralOperator::get(64);
        const double a = op->hminus1_by_solve(u.vec()), b = op->hminus1_by_fourier(u.vec());
        worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
    }
    items.push_back({"hminus1_cross_method", worst, 1e-8});

    const auto qt = build_free_energy(quartic, -2.0, 2.0, 401);
    const auto rho0 = GridFunction::sample(64, [](double th) { return 0.2 + 0.6 * std::sin(kTwoPi * th); });
    const auto sol = solve_hydro(qt, 1.0 / std::log(2.0), rho0, {.t_end = 0.02, .dt = 1e-6, .n_out = 200});
    double mean_err = 0.0;
    for (const auto& f : sol.frames) mean_err = std::max(mean_err, std::abs(f.mean() - rho0.mean()));
    items.push_back({"hydro_mean", mean_err, 1e-12});
    items.push_back({"rate_zero_on_hydro", rate_random_env(qt, 1.0 / std::log(2.0), rho0, sol).total, 1e-4});

    json arr = json::array();
    std::string failed;
    for (const auto& it : items) {
        const bool pass = it.value <= it.tol;
        arr.push_back(json{{"name", it.name}, {"value", it.value}, {"tol", it.tol}, {"pass", pass}});
        if (!pass && failed.empty()) failed = it.name;
    }
    io::write_json(run.file("check.json"), json{{"items", arr}});
    write_manifest(run, json{{"failed", failed.empty() ? json(nullptr) : json(failed)}});
    if (!failed.empty()) fail(ErrorCode::CrossCheckFailed, "invariant '" + failed + "' failed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kawasaki-type lattice dynamics: simulation, hydrodynamics and rate functionals"};
    app.require_subcommand(1);
    Flags flags;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"phi", "tabulate the macroscopic free energy"},
        {"simulate", "run replicas of the lattice dynamics"},
        {"hydro", "solve the hydrodynamic equation"},
        {"rate", "evaluate the rate functional of a space-time profile"},
        {"tilt", "run the tilted dynamics and the control-cost identity check"},
        {"homogenize", "approximate the effective diffusion coefficient"},
        {"ldp", "tube probabilities, tilted estimates and rate curves"},
        {"check", "run the invariant suite"}};
    std::string chosen;
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", flags.config, "experiment configuration (JSON)")->required();
        sub->add_option("--out", flags.out, "output directory");
        sub->add_option("--seed", flags.seed, "override the config seed");
        sub->add_option("--replicas", flags.replicas, "override the replica count");
        sub->add_option("--threads", flags.threads, "worker threads (outputs do not depend on it)")
            ->check(CLI::PositiveNumber);
        if (name == "rate") sub->add_option("--profile", flags.profile, "space-time profile CSV (t,theta,rho)");
        sub->callback([&chosen, n = name] { chosen = n; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    Run run;
    run.command = chosen;
    run.flags = flags;
    try {
        load(run);
        if (chosen == "phi") cmd_phi(run);
        else if (chosen == "simulate") cmd_simulate(run);
        else if (chosen == "hydro") cmd_hydro(run);
        else if (chosen == "rate") cmd_rate(run);
        else if (chosen == "tilt") cmd_tilt(run);
        else if (chosen == "homogenize") cmd_homogenize(run);
        else if (chosen == "ldp") cmd_ldp(run);
        else cmd_check(run);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidArgument) {
            std::cerr << "config error: " << e.what() << '\n';
            return 1;
        }
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
