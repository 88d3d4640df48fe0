#pragma once

// Scenario runner behind the opdyn command line: JSON configs, built-in presets,
// model dispatch and output writing.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "opdyn/opdyn.hpp"

namespace opdyn::cli {

using nlohmann::json;
namespace fs = std::filesystem;

/// Failure with the pipeline stage it happened in and a hint for the user.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message, std::string hint = {})
        : Error(message), stage_(std::move(stage)), hint_(std::move(hint)) {}

    const std::string& stage() const noexcept { return stage_; }
    const std::string& hint() const noexcept { return hint_; }

private:
    std::string stage_, hint_;
};

struct Preset {
    std::string name;
    std::string description;
    json config;
};

inline json tetrahedron_points(double b, double a) {
    return json::array({{0.0, 0.0, b}, {0.0, 0.0, -b}, {a, 0.0, 0.0}, {0.0, a, 0.0}});
}

inline json fj4_matrix() {
    return json::array({{0.22, 0.12, 0.36, 0.3},
                        {0.147, 0.215, 0.344, 0.294},
                        {0.0, 0.0, 1.0, 0.0},
                        {0.09, 0.178, 0.446, 0.286}});
}

inline const std::vector<Preset>& presets() {
    static const std::vector<Preset> list = {
        {"table1", "2R experiment: HK cluster counts vs rounded 1/(2d), n = 100, uniform x0",
         {{"experiment", "two_r"},
          {"n", 100},
          {"d_list", {0.05, 0.06, 0.11, 0.12, 0.2, 0.25}},
          {"trials", 50},
          {"seed", 0}}},
        {"tetrahedron-merge", "3-D HK on a tetrahedron (d = 1, b = 0.4, a = 0.95): components merge, consensus at step 3",
         {{"model", "hk"},
          {"params", {{"d", 1.0}, {"norm", "euclidean"}}},
          {"x0", tetrahedron_points(0.4, 0.95)},
          {"horizon", 100},
          {"outputs", {"trajectory", "clusters", "classification"}}}},
        {"altafini3", "3-agent imbalanced Altafini flow converging to (xi, -xi, xi/3)",
         {{"model", "altafini"},
          {"params", {{"A", {{0.0, -1.0, 0.0}, {-1.0, 0.0, 0.0}, {2.0, 1.0, 0.0}}}}},
          {"x0", {1.0, -0.2, 0.5}},
          {"horizon", 40.0},
          {"dt", 0.01},
          {"outputs", {"trajectory", "classification", "balance"}}}},
        {"fj-gossip4", "gossip Friedkin-Johnsen on the 4-agent example; Cesaro average near (60, 60, 75, 75)",
         {{"model", "gossip-fj"},
          {"params", {{"W", fj4_matrix()}, {"lambda", "complement-diagonal"}, {"u", {25.0, 25.0, 75.0, 85.0}}}},
          {"x0", {25.0, 25.0, 75.0, 85.0}},
          {"horizon", 200000},
          {"record_every", 1000},
          {"seed", 1},
          {"outputs", {"summary", "trajectory"}}}},
        {"dw-basic", "symmetric Deffuant-Weisbuch, n = 50, d = 0.3, mu = 0.5, uniform x0",
         {{"model", "dw"},
          {"params", {{"d", 0.3}, {"mu", 0.5}, {"mode", "symmetric"}}},
          {"x0", {{"uniform", {{"lo", 0.0}, {"hi", 1.0}, {"n", 50}}}}},
          {"horizon", 250000},
          {"record_every", 5000},
          {"seed", 1},
          {"outputs", {"summary", "trajectory", "clusters"}}}},
        {"hk-termination-sweep", "HK termination times vs the 2n^3 - 2(n-1)^2 bound over random instances",
         {{"experiment", "hk_termination"},
          {"n_list", {2, 5, 10, 20, 30}},
          {"d_list", {0.05, 0.1, 0.2, 0.5}},
          {"trials", 20},
          {"seed", 0}}},
        {"heterophily", "phi-weighted HK with heterophilic weights (a = 1, b = 2, d1 = 0.1, d2 = 0.2)",
         {{"model", "phi"},
          {"params", {{"phi", "heterophily"}, {"a", 1.0}, {"b", 2.0}, {"d1", 0.1}, {"d2", 0.2}, {"stop_tol", 1e-12}}},
          {"x0", {{"uniform", {{"lo", 0.0}, {"hi", 1.0}, {"n", 50}}}}},
          {"horizon", 10000},
          {"seed", 1},
          {"outputs", {"trajectory", "energies", "clusters", "classification"}}}},
    };
    return list;
}

inline const Preset& find_preset(const std::string& name) {
    for (const auto& p : presets())
        if (p.name == name) return p;
    throw StageError("config", "unknown preset '" + name + "'", "run `opdyn presets` for the list");
}

// ---------------------------------------------------------------------------
// Config helpers
// ---------------------------------------------------------------------------

struct Context {
    json config;
    fs::path base;  ///< directory that relative file paths are resolved against
    fs::path out = ".";
    std::string format = "csv";
};

/// Preset, then config file, then command-line overrides (later wins).
inline Context make_context(const std::optional<std::string>& preset, const std::optional<std::string>& config_path,
                            const std::optional<std::uint64_t>& seed, const std::optional<std::string>& format,
                            const std::optional<std::string>& out) {
    Context ctx;
    ctx.config = json::object();
    if (preset) ctx.config = find_preset(*preset).config;
    if (config_path) {
        if (!fs::exists(*config_path)) throw StageError("config", "config file not found: " + *config_path);
        json file;
        try {
            file = json::parse(io::read_file(*config_path));
        } catch (const json::parse_error& e) {
            throw StageError("config", std::string("config is not valid JSON: ") + e.what());
        }
        if (!file.is_object()) throw StageError("config", "config must be a JSON object");
        ctx.config.merge_patch(file);
        ctx.base = fs::path(*config_path).parent_path();
    }
    if (!preset && !config_path) throw StageError("config", "nothing to run", "pass --config PATH or --preset NAME");
    if (seed) ctx.config["seed"] = *seed;
    ctx.format = format ? *format : ctx.config.value("format", std::string("csv"));
    if (ctx.format != "csv" && ctx.format != "json")
        throw StageError("config", "format must be csv or json");
    if (out) ctx.out = *out;
    else if (ctx.config.contains("out")) ctx.out = ctx.config.at("out").get<std::string>();
    return ctx;
}

namespace detail {

inline const json& require(const json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key))
        throw StageError("config", std::string("missing required field '") + key + "'");
    return obj.at(key);
}

inline std::vector<double> number_list(const json& j, std::size_t n, const char* what) {
    if (j.is_number()) return std::vector<double>(n, j.get<double>());
    if (!j.is_array()) throw StageError("config", std::string(what) + " must be a number or a list");
    std::vector<double> out;
    for (const auto& v : j) out.push_back(v.get<double>());
    if (out.size() != n) throw StageError("config", std::string(what) + " needs one entry per agent");
    return out;
}

inline std::uint64_t seed_of(const json& cfg) { return cfg.value("seed", std::uint64_t{0}); }

/// Stream reserved for initial-condition sampling, disjoint from trial streams.
constexpr std::uint64_t kInitStream = 0xFFFF'FFFFull;

inline OpinionState initial_state(const json& cfg) {
    const json& x0 = require(cfg, "x0");
    if (x0.is_array()) return io::state_from_json(x0);
    if (x0.is_object() && x0.contains("uniform")) {
        const json& u = x0.at("uniform");
        const double lo = u.value("lo", 0.0), hi = u.value("hi", 1.0);
        const auto n = u.value("n", std::size_t{0});
        const auto m = u.value("m", std::size_t{1});
        if (n < 1 || m < 1 || !(hi > lo)) throw StageError("config", "uniform x0 needs n >= 1, m >= 1 and hi > lo");
        RngStream rng(seed_of(cfg), kInitStream);
        Matrix v(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
        for (Eigen::Index i = 0; i < v.rows(); ++i)
            for (Eigen::Index k = 0; k < v.cols(); ++k) v(i, k) = rng.uniform(lo, hi);
        return OpinionState(std::move(v));
    }
    if (x0.is_object() && x0.contains("preset")) {
        const std::string name = x0.at("preset").get<std::string>();
        if (name == "tetrahedron")
            return io::state_from_json(tetrahedron_points(x0.value("b", 0.4), x0.value("a", 0.95)));
        throw StageError("config", "unknown x0 preset '" + name + "'", "known: tetrahedron");
    }
    throw StageError("config", "x0 must be a list, {\"uniform\": {...}} or {\"preset\": name}");
}

inline Norm parse_norm(const std::string& s) {
    if (s == "euclidean") return Norm::Euclidean;
    if (s == "max") return Norm::Max;
    if (s == "sum") return Norm::Sum;
    throw StageError("config", "unknown norm '" + s + "'", "use euclidean, max or sum");
}

inline ConfidenceSpec confidence_from(const json& p, const OpinionState& x) {
    ConfidenceSpec spec;
    spec.closed = !p.value("open", false);
    const std::size_t n = x.n();
    if (x.m() > 1 || p.contains("norm")) {
        const json& d = require(p, "d");
        spec.geometry = confidence::NormBall{d.is_number() ? std::vector<double>{d.get<double>()} : number_list(d, n, "d"),
                                             parse_norm(p.value("norm", std::string("euclidean")))};
    } else if (p.contains("d_left") || p.contains("d_right")) {
        const json& l = require(p, "d_left");
        const json& r = require(p, "d_right");
        if (l.is_number() && r.is_number()) spec.geometry = confidence::Asymmetric{l.get<double>(), r.get<double>()};
        else spec.geometry = confidence::PerAgentAsymmetric{number_list(l, n, "d_left"), number_list(r, n, "d_right")};
    } else if (p.contains("eta")) {
        spec.geometry = confidence::PerAgentShifted{require(p, "d").get<double>(), number_list(p.at("eta"), n, "eta")};
    } else {
        const json& d = require(p, "d");
        if (d.is_number()) spec.geometry = confidence::Symmetric{d.get<double>()};
        else spec.geometry = confidence::PerAgentSymmetric{number_list(d, n, "d")};
    }
    spec.validate(n, x.m());
    return spec;
}

inline WeightSpec weights_from(const json& p, const char* key, WeightKind kind, const fs::path& base) {
    if (p.contains("schedule"))
        return WeightSpec::scheduled(kind, io::schedule_from_json(p.at("schedule"), p.value("periodic", false), base));
    return WeightSpec::constant(kind, io::load_matrix(require(p, key), base));
}

inline std::vector<double> susceptibilities(const json& p, const Matrix& w) {
    const json& l = require(p, "lambda");
    if (l.is_string()) {
        if (l.get<std::string>() != "complement-diagonal")
            throw StageError("config", "lambda must be a list, a number or \"complement-diagonal\"");
        std::vector<double> out;
        for (Eigen::Index i = 0; i < w.rows(); ++i) out.push_back(1.0 - w(i, i));
        return out;
    }
    return number_list(l, static_cast<std::size_t>(w.rows()), "lambda");
}

inline Matrix prejudice(const json& p, const OpinionState& x0) {
    if (!p.contains("u")) return x0.values();
    return io::state_from_json(p.at("u")).values();
}

} // namespace detail

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct SimulationResult {
    std::string model;
    Trajectory trajectory;
    std::optional<std::vector<std::vector<Arc>>> pairs;  ///< per-step interactions, when defined
    std::optional<double> confidence;                    ///< natural cluster scale for BC models
    std::optional<OpinionState> cesaro_final;
    std::vector<double> energy;                          ///< Lyapunov energy per recorded state
    json extras = json::object();                        ///< model-specific report fields
};

inline SimulationResult simulate(const Context& ctx) {
    const json& cfg = ctx.config;
    const std::string model = detail::require(cfg, "model").get<std::string>();
    const json params = cfg.value("params", json::object());
    const OpinionState x0 = detail::initial_state(cfg);
    const std::uint64_t seed = detail::seed_of(cfg);
    const std::size_t record_every = cfg.value("record_every", std::size_t{1});
    SimulationResult r;
    r.model = model;

    auto steps_horizon = [&] {
        const double h = detail::require(cfg, "horizon").get<double>();
        if (!(h >= 1.0)) throw StageError("config", "horizon must be at least one step");
        return static_cast<std::size_t>(h);
    };

    if (model == "hk" || model == "hk-truth" || model == "hk-inertial" || model == "phi") {
        BcOptions opts;
        opts.max_steps = steps_horizon();
        opts.stop_tol = params.value("stop_tol", 0.0);
        opts.require_termination = params.value("require_termination", false);
        Stepper step;
        if (model == "phi") {
            const std::string kind = detail::require(params, "phi").get<std::string>();
            PhiSpec phi;
            if (kind == "hk") phi = PhiSpec::hk(detail::require(params, "d").get<double>());
            else if (kind == "heterophily")
                phi = PhiSpec::heterophily(detail::require(params, "a").get<double>(),
                                           detail::require(params, "b").get<double>(),
                                           detail::require(params, "d1").get<double>(),
                                           detail::require(params, "d2").get<double>());
            else if (kind == "reputation")
                phi = PhiSpec::reputation(detail::number_list(detail::require(params, "w"), x0.n(), "w"),
                                          detail::require(params, "d").get<double>());
            else throw StageError("config", "unknown phi '" + kind + "'", "use hk, heterophily or reputation");
            phi.validate(x0.n());
            step = [phi](const OpinionState& x) { return phi_step(x, phi); };
            if (kind == "hk") r.confidence = params.at("d").get<double>();
            else if (kind == "heterophily") r.confidence = params.at("d2").get<double>();
            else r.confidence = params.at("d").get<double>();
            r.trajectory = simulate_bc(step, x0, opts);
            if (phi.antiderivative || std::holds_alternative<PhiFn>(phi.phi))
                for (const auto& x : r.trajectory.states) r.energy.push_back(phi_energy(x, phi));
        } else {
            const ConfidenceSpec spec = detail::confidence_from(params, x0);
            if (model == "hk") {
                step = hk_stepper(spec);
            } else if (model == "hk-truth") {
                const auto lambda = detail::number_list(detail::require(params, "lambda"), x0.n(), "lambda");
                const json& t = detail::require(params, "truth");
                Eigen::RowVectorXd truth(static_cast<Eigen::Index>(x0.m()));
                if (t.is_number()) truth.setConstant(t.get<double>());
                else
                    for (Eigen::Index k = 0; k < truth.size(); ++k) truth(k) = t.at(static_cast<std::size_t>(k)).get<double>();
                step = [spec, lambda, truth](const OpinionState& x) { return truth_step(x, lambda, truth, spec); };
            } else {
                const auto lambda = detail::number_list(detail::require(params, "lambda"), x0.n(), "lambda");
                step = [spec, lambda](const OpinionState& x) { return inertial_step(x, lambda, spec); };
            }
            r.trajectory = simulate_bc(step, x0, opts);
            if (const auto* s = std::get_if<confidence::Symmetric>(&spec.geometry)) {
                r.confidence = s->d;
                for (const auto& x : r.trajectory.states) r.energy.push_back(hk_energy(x, s->d));
            } else if (const auto* b = std::get_if<confidence::NormBall>(&spec.geometry); b && b->d.size() == 1) {
                r.confidence = b->d.front();
                if (b->norm == Norm::Euclidean)
                    for (const auto& x : r.trajectory.states) r.energy.push_back(hk_energy(x, b->d.front()));
            }
            r.pairs = hk_pairs(r.trajectory, spec);
        }
        r.extras["terminated_at"] = r.trajectory.terminated_at ? json(*r.trajectory.terminated_at) : json(nullptr);
        if (model == "hk") r.extras["termination_bound"] = hk_termination_bound(x0.n());
        return r;
    }

    if (model == "smooth-hk") {
        const double d = detail::require(params, "d").get<double>();
        const double t_end = detail::require(cfg, "horizon").get<double>();
        const double dt = cfg.value("dt", 0.01 / (1.0 + static_cast<double>(x0.n())));
        r.trajectory = smooth_hk_simulate(x0, bump_influence(d), t_end, dt, {record_every});
        r.confidence = d;
        return r;
    }

    if (model == "degroot" || model == "signed-discrete") {
        const bool is_signed = model == "signed-discrete";
        const WeightSpec w = detail::weights_from(params, "W", is_signed ? WeightKind::Signed : WeightKind::Stochastic, ctx.base);
        r.trajectory = simulate_discrete(w, x0, steps_horizon());
        std::vector<std::vector<Arc>> pairs;
        for (std::size_t k = 0; k + 1 < r.trajectory.size(); ++k) {
            const Matrix a = w.at(static_cast<double>(k));
            std::vector<Arc> step_pairs;
            for (Eigen::Index i = 0; i < a.rows(); ++i)
                for (Eigen::Index j = 0; j < a.cols(); ++j)
                    if (a(i, j) != 0.0) step_pairs.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            pairs.push_back(std::move(step_pairs));
        }
        r.pairs = std::move(pairs);
        return r;
    }

    if (model == "flow" || model == "altafini") {
        const bool is_signed = model == "altafini" || params.value("signed", false);
        const WeightSpec w = detail::weights_from(params, "A", is_signed ? WeightKind::Signed : WeightKind::Nonnegative, ctx.base);
        const double t_end = detail::require(cfg, "horizon").get<double>();
        double max_row = 0.0;
        for (const Matrix& a : w.stored_matrices()) max_row = std::max(max_row, a.cwiseAbs().rowwise().sum().maxCoeff());
        const double dt = cfg.value("dt", 0.01 / (1.0 + max_row));
        r.trajectory = flow_simulate(w, x0, t_end, dt, is_signed, {record_every});
        if (model == "altafini") {
            const Matrix a = w.stored_matrices().front();
            const SignedGraph g(a);
            const BalanceResult balance = structural_balance(g);
            r.extras["balance"] = io::balance_to_json(balance);
            const ConnectivityReport conn = connectivity(g);
            r.extras["strongly_connected"] = conn.strongly_connected;
            r.extras["has_spanning_tree"] = conn.has_spanning_tree;
            const BipartitePrediction pred = predict_bipartite_consensus(g, x0);
            if (pred.limit) {
                r.extras["prediction"] = io::state_to_json(*pred.limit);
                r.extras["prediction_error"] = max_abs_diff(*pred.limit, r.trajectory.back());
            } else {
                r.extras["prediction"] = nullptr;
                r.extras["prediction_note"] = pred.reason;
            }
            if (x0.n() == 3 && x0.m() == 1 && a(0, 1) < 0.0 && a(1, 0) < 0.0 && a(0, 2) == 0.0 && a(1, 2) == 0.0 &&
                a(2, 0) > 0.0 && a(2, 1) > 0.0) {
                // Equilibrium family (xi, -xi, rho xi) of the 3-agent example.
                const double rho = (a(2, 0) - a(2, 1)) / (a(2, 0) + a(2, 1));
                const OpinionState& xf = r.trajectory.back();
                const double xi = 0.5 * (xf[0] - xf[1]);
                const double err = std::max({std::abs(xf[0] - xi), std::abs(xf[1] + xi), std::abs(xf[2] - rho * xi)});
                r.extras["family_check"] = {{"rho", rho},
                                            {"xi", xi},
                                            {"max_error", err},
                                            {"in_family", err < 1e-6},
                                            {"modulus_consensus", modulus_consensus(xf, 1e-6)}};
            }
        }
        return r;
    }

    if (model == "fj") {
        const Matrix w = io::load_matrix(detail::require(params, "W"), ctx.base);
        const auto lambda = detail::susceptibilities(params, w);
        FJSpec spec{Eigen::Map<const Vector>(lambda.data(), static_cast<Eigen::Index>(lambda.size())), w,
                    OpinionState(detail::prejudice(params, x0))};
        spec.validate();
        Trajectory traj;
        traj.push(x0, 0.0);
        const std::size_t steps = steps_horizon();
        for (std::size_t k = 0; k < steps; ++k) traj.push(fj_step(spec, traj.back()), static_cast<double>(k + 1));
        r.trajectory = std::move(traj);
        const OpinionState fixed = fj_fixed_point(spec);
        r.extras["fixed_point"] = io::state_to_json(fixed);
        return r;
    }

    if (model == "gossip-degroot" || model == "gossip-pair" || model == "gossip-fj" || model == "dw" ||
        model == "dw-heterogeneous") {
        GossipModel gm;
        if (model == "gossip-degroot") {
            gm = DegrootGossip{io::load_matrix(detail::require(params, "P"), ctx.base),
                               detail::number_list(detail::require(params, "gamma"), x0.n(), "gamma")};
        } else if (model == "gossip-pair") {
            gm = SymmetricPair{io::load_matrix(detail::require(params, "P"), ctx.base)};
        } else if (model == "gossip-fj") {
            if (params.contains("gamma1")) {
                std::vector<Arc> arcs;
                for (const auto& a : detail::require(params, "arcs"))
                    arcs.emplace_back(a.at(0).get<std::size_t>(), a.at(1).get<std::size_t>());
                gm = GossipFJ{io::load_matrix(params.at("gamma1"), ctx.base),
                              io::load_matrix(detail::require(params, "gamma2"), ctx.base), detail::prejudice(params, x0),
                              std::move(arcs)};
            } else {
                const Matrix w = io::load_matrix(detail::require(params, "W"), ctx.base);
                const auto lambda = detail::susceptibilities(params, w);
                const Matrix u = detail::prejudice(params, x0);
                gm = make_gossip_fj(w, lambda, u);
                FJSpec fj{Eigen::Map<const Vector>(lambda.data(), static_cast<Eigen::Index>(lambda.size())), w,
                          OpinionState(u)};
                r.extras["fj_fixed_point"] = io::state_to_json(fj_fixed_point(fj));
            }
        } else if (model == "dw") {
            const std::string mode = params.value("mode", std::string("symmetric"));
            if (mode != "symmetric" && mode != "asymmetric")
                throw StageError("config", "DW mode must be symmetric or asymmetric");
            gm = DW{detail::require(params, "d").get<double>(), params.value("mu", 0.5),
                    mode == "symmetric" ? DwMode::Symmetric : DwMode::Asymmetric};
            r.confidence = std::get<DW>(gm).d;
        } else {
            gm = DWHeterogeneous{detail::number_list(detail::require(params, "d"), x0.n(), "d"), params.value("mu", 0.5)};
            const auto& ds = std::get<DWHeterogeneous>(gm).d;
            r.confidence = *std::min_element(ds.begin(), ds.end());
        }
        GossipOptions opts;
        opts.record_every = record_every;
        const auto& outputs = cfg.value("outputs", json::array());
        opts.record_events = std::find(outputs.begin(), outputs.end(), "events") != outputs.end() ||
                             std::find(outputs.begin(), outputs.end(), "energies") != outputs.end();
        opts.track_cesaro = true;
        GossipRun run = run_gossip(gm, x0, steps_horizon(), RngSeed{seed, cfg.value("stream", std::uint64_t{0})}, opts);
        r.trajectory = std::move(run.trajectory);
        r.cesaro_final = std::move(run.cesaro_final);
        if (opts.record_events && record_every == 1) r.pairs = gossip_pairs(r.trajectory);
        return r;
    }

    throw StageError("config", "unknown model '" + model + "'",
                     "models: hk, hk-truth, hk-inertial, phi, smooth-hk, degroot, signed-discrete, flow, altafini, fj, "
                     "gossip-degroot, gossip-pair, gossip-fj, dw, dw-heterogeneous");
}

inline double cluster_scale(const Context& ctx, const SimulationResult& r) {
    if (ctx.config.contains("gap_tol")) return ctx.config.at("gap_tol").get<double>();
    if (r.confidence) return *r.confidence;
    const double diam = r.trajectory.front().diameter();
    return diam > 0.0 ? 1e-4 * diam : 1e-9;
}

inline json trajectory_json(const Trajectory& t) {
    json states = json::array();
    for (const auto& x : t.states) states.push_back(io::state_to_json(x));
    return {{"stamps", t.stamps},
            {"terminated_at", t.terminated_at ? json(*t.terminated_at) : json(nullptr)},
            {"states", std::move(states)}};
}

/// Writes the requested outputs; returns the list of files written.
inline std::vector<fs::path> write_outputs(const Context& ctx, const SimulationResult& r) {
    const json& cfg = ctx.config;
    const json outputs = cfg.value("outputs", json::array({"trajectory"}));
    const double tol = cfg.value("tol", 1e-6);
    std::vector<fs::path> written;
    auto emit = [&](const std::string& name, const std::string& content) {
        const fs::path p = ctx.out / name;
        io::atomic_write(p, content);
        written.push_back(p);
    };
    for (const auto& o : outputs) {
        const std::string what = o.get<std::string>();
        if (what == "trajectory") {
            if (ctx.format == "csv") emit("trajectory.csv", io::trajectory_to_csv(r.trajectory));
            else emit("trajectory.json", trajectory_json(r.trajectory).dump(1) + "\n");
        } else if (what == "events") {
            emit("events.csv", io::events_to_csv(r.trajectory.events));
        } else if (what == "energies") {
            json e = {{"model", r.model}};
            if (!r.energy.empty()) e["lyapunov"] = r.energy;
            if (r.pairs) {
                const SEnergy s2 = s_energy(r.trajectory, *r.pairs, 2.0);
                const SEnergy s1 = s_energy(r.trajectory, *r.pairs, 1.0);
                e["s_energy"] = {{"s1", {{"total", s1.total}, {"kinetic", s1.kinetic}}},
                                 {"s2", {{"total", s2.total}, {"kinetic", s2.kinetic}}}};
                if (r.confidence) {
                    const double n = static_cast<double>(r.trajectory.front().n());
                    e["kinetic_bound"] = *r.confidence * *r.confidence * n * (n - 1.0);
                }
            }
            emit("energies.json", e.dump(1) + "\n");
        } else if (what == "clusters") {
            emit("clusters.json", io::clusters_to_json(clusters(r.trajectory.back(), cluster_scale(ctx, r))).dump(1) + "\n");
        } else if (what == "classification") {
            json c = io::outcome_to_json(classify(r.trajectory, tol));
            c["model"] = r.model;
            c["tol"] = tol;
            for (auto it = r.extras.begin(); it != r.extras.end(); ++it) c[it.key()] = it.value();
            emit("classification.json", c.dump(1) + "\n");
        } else if (what == "summary") {
            json s = io::gossip_summary(detail::seed_of(cfg), r.trajectory.back(), r.cesaro_final,
                                        clusters(r.trajectory.back(), cluster_scale(ctx, r)));
            for (auto it = r.extras.begin(); it != r.extras.end(); ++it) s[it.key()] = it.value();
            emit("summary.json", s.dump(1) + "\n");
        } else if (what == "balance") {
            if (!r.extras.contains("balance"))
                throw StageError("config", "balance output is only available for the altafini model");
            emit("balance.json", r.extras.at("balance").dump(1) + "\n");
        } else {
            throw StageError("config", "unknown output '" + what + "'",
                             "outputs: trajectory, events, energies, clusters, classification, summary, balance");
        }
    }
    return written;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct TerminationRow {
    std::size_t n = 0;
    double d = 0.0;
    std::size_t trials = 0;
    std::size_t max_steps = 0;
    double mean_steps = 0.0;
    std::size_t bound = 0;
};

inline std::vector<TerminationRow> hk_termination_sweep(const std::vector<std::size_t>& n_list,
                                                        const std::vector<double>& d_list, std::size_t trials,
                                                        std::uint64_t seed) {
    if (trials < 1) throw InvalidArgument("sweep needs trials >= 1");
    std::vector<TerminationRow> rows;
    std::uint64_t stream = 0;
    for (std::size_t n : n_list)
        for (double d : d_list) {
            TerminationRow row{n, d, trials, 0, 0.0, hk_termination_bound(n)};
            BcOptions opts;
            opts.max_steps = row.bound + 1;
            for (std::size_t t = 0; t < trials; ++t) {
                RngStream rng(seed, stream++);
                std::vector<double> xs(n);
                for (auto& v : xs) v = rng.uniform01();
                const Trajectory traj = simulate_bc(hk_stepper(ConfidenceSpec::symmetric(d)), OpinionState::scalar(xs), opts);
                row.max_steps = std::max(row.max_steps, *traj.terminated_at);
                row.mean_steps += static_cast<double>(*traj.terminated_at) / static_cast<double>(trials);
            }
            rows.push_back(row);
        }
    return rows;
}

inline std::vector<fs::path> run_experiment(const Context& ctx) {
    const json& cfg = ctx.config;
    const std::string kind = detail::require(cfg, "experiment").get<std::string>();
    const std::uint64_t seed = detail::seed_of(cfg);
    std::vector<fs::path> written;
    auto emit = [&](const std::string& name, const std::string& content) {
        const fs::path p = ctx.out / name;
        io::atomic_write(p, content);
        written.push_back(p);
    };
    if (kind == "two_r") {
        const auto d_list = detail::require(cfg, "d_list").get<std::vector<double>>();
        const auto rows = two_r_experiment(cfg.value("n", std::size_t{100}), d_list, cfg.value("trials", std::size_t{50}), seed);
        if (ctx.format == "csv") emit("two_r.csv", io::two_r_to_csv(rows));
        else {
            json j = {{"seed", seed}, {"n", cfg.value("n", 100)}, {"rows", io::two_r_to_json(rows)}};
            const auto nm = find_nonmonotonicity(rows);
            j["nonmonotone_pair"] = nm ? json({nm->first, nm->second}) : json(nullptr);
            emit("two_r.json", j.dump(1) + "\n");
        }
        return written;
    }
    if (kind == "hk_termination") {
        const auto rows = hk_termination_sweep(detail::require(cfg, "n_list").get<std::vector<std::size_t>>(),
                                               detail::require(cfg, "d_list").get<std::vector<double>>(),
                                               cfg.value("trials", std::size_t{20}), seed);
        if (ctx.format == "csv") {
            std::string out = "n,d,trials,max_steps,mean_steps,bound\n";
            for (const auto& r : rows)
                out += std::to_string(r.n) + ',' + io::format_double(r.d) + ',' + std::to_string(r.trials) + ',' +
                       std::to_string(r.max_steps) + ',' + io::format_double(r.mean_steps) + ',' +
                       std::to_string(r.bound) + '\n';
            emit("hk_termination.csv", out);
        } else {
            json j = json::array();
            for (const auto& r : rows)
                j.push_back({{"n", r.n}, {"d", r.d}, {"trials", r.trials}, {"max_steps", r.max_steps},
                             {"mean_steps", r.mean_steps}, {"bound", r.bound}});
            emit("hk_termination.json", j.dump(1) + "\n");
        }
        return written;
    }
    throw StageError("config", "unknown experiment '" + kind + "'", "experiments: two_r, hk_termination");
}

// ---------------------------------------------------------------------------
// Analysis of stored outputs
// ---------------------------------------------------------------------------

struct AnalyzeRequest {
    std::optional<std::string> trajectory;
    std::optional<std::string> balance;
    double tol = 1e-6;
    std::optional<double> gap_tol;
};

inline json analyze(const AnalyzeRequest& req) {
    if (req.balance) {
        const Matrix a = io::load_matrix(json{{"file", *req.balance}});
        const SignedGraph g(a);
        json j = io::balance_to_json(structural_balance(g));
        const ConnectivityReport conn = connectivity(g);
        j["strongly_connected"] = conn.strongly_connected;
        j["has_spanning_tree"] = conn.has_spanning_tree;
        return j;
    }
    if (!req.trajectory) throw StageError("config", "nothing to analyze", "pass --trajectory FILE or --balance FILE");
    const Trajectory traj = io::trajectory_from_csv(io::read_file(*req.trajectory));
    const double diam = traj.front().diameter();
    const double gap = req.gap_tol ? *req.gap_tol : (diam > 0.0 ? 1e-4 * diam : 1e-9);
    json j = {{"classification", io::outcome_to_json(classify(traj, req.tol))},
              {"clusters", io::clusters_to_json(clusters(traj.back(), gap))},
              {"records", traj.size()}};
    if (traj.back().m() == 1) j["modulus_consensus"] = modulus_consensus(traj.back(), req.tol);
    return j;
}

} // namespace opdyn::cli
