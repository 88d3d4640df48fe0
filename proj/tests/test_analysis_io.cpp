#include <gtest/gtest.h>

#include <filesystem>

#include "runner.hpp"
#include "support/oracles.hpp"

using namespace opdyn;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Trajectory from_states(std::vector<OpinionState> xs) {
    Trajectory t;
    for (std::size_t k = 0; k < xs.size(); ++k) t.push(std::move(xs[k]), static_cast<double>(k));
    return t;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("opdyn_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

json read_json(const fs::path& p) { return json::parse(io::read_file(p)); }

} // namespace

TEST(SEnergy, Examples) {
    const auto constant = from_states({OpinionState::scalar({1, 2}), OpinionState::scalar({1, 2})});
    EXPECT_EQ(s_energy(constant, {{{0, 1}}}, 2.0).kinetic, 0.0);
    EXPECT_EQ(s_energy(constant, {{{0, 1}}}, 2.0).total, 1.0);

    const auto merge = from_states({OpinionState::scalar({0, 1}), OpinionState::scalar({0.5, 0.5})});
    EXPECT_DOUBLE_EQ(s_energy(merge, {{{0, 1}, {1, 0}}}, 2.0).kinetic, 0.5);
    EXPECT_DOUBLE_EQ(s_energy(merge, {{{0, 1}, {1, 0}}}, 2.0).total, 2.0);
    EXPECT_DOUBLE_EQ(s_energy(merge, {{}}, 1.0).kinetic, 1.0);

    EXPECT_THROW(s_energy(merge, {}, 2.0), InvalidArgument);
    EXPECT_THROW(s_energy(merge, {{}}, 0.0), InvalidArgument);
    EXPECT_THROW(s_energy(merge, {{{0, 5}}}, 2.0), InvalidArgument);
}

TEST(SEnergy, GossipPairsFollowEvents) {
    const DW dw{0.5, 0.5, DwMode::Symmetric};
    const auto traj = simulate_gossip(dw, OpinionState::scalar({0, 0.3, 0.9, 1.0}), 200, RngSeed{3, 0});
    const auto pairs = gossip_pairs(traj);
    ASSERT_EQ(pairs.size(), 200u);
    double total = 0.0;
    for (std::size_t k = 0; k < 200; ++k) {
        ASSERT_EQ(pairs[k].size(), traj.events[k].interacted ? 1u : 0u);
        if (!pairs[k].empty()) total += std::abs(traj.states[k][pairs[k][0].first] - traj.states[k][pairs[k][0].second]);
    }
    EXPECT_NEAR(s_energy(traj, pairs, 1.0).total, total, 1e-12);
}

TEST(Clusters, Examples) {
    EXPECT_EQ(clusters(OpinionState::scalar({0.3, 0.3, 0.3}), 1e-9).count(), 1u);
    const auto p = clusters(OpinionState::scalar({0, 0.001, 0.9}), 0.01);
    ASSERT_EQ(p.count(), 2u);
    EXPECT_EQ(p.clusters[0].members, (std::vector<std::size_t>{0, 1}));
    EXPECT_DOUBLE_EQ(p.clusters[0].representative(0), 0.0005);
    EXPECT_NEAR(p.min_separation, 0.899, 1e-15);
    const auto planar = clusters(OpinionState::points({{0, 0}, {0.005, 0}, {1, 1}, {1, 1.005}}), 0.01);
    EXPECT_EQ(planar.count(), 2u);
    EXPECT_THROW(clusters(OpinionState::scalar({0}), 0.0), InvalidArgument);
}

TEST(Clusters, TerminatedHkMatchesConsensusGroups) {
    RngStream rng(70, 0);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng.index(40);
        const double d = rng.uniform(0.03, 0.3);
        const auto traj = simulate_bc(hk_stepper(ConfidenceSpec::symmetric(d)), oracle::uniform_scalar(rng, n));
        const auto& xf = traj.back();
        const auto p = clusters(xf, d);
        std::set<double> distinct(xf.values().data(), xf.values().data() + n);
        EXPECT_EQ(p.count(), distinct.size());
        EXPECT_GT(p.min_separation, d);
        for (const auto& c : p.clusters)
            for (auto i : c.members) EXPECT_EQ(xf[i], xf[c.members.front()]);
    }
}

TEST(Clusters, PermutationEquivariant) {
    RngStream rng(71, 0);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng.index(30);
        const std::size_t m = 1 + rng.index(2);
        Matrix v(n, m);
        for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = std::round(rng.uniform(0, 10)) / 10.0;
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
        Matrix pv(n, m);
        for (std::size_t i = 0; i < n; ++i) pv.row(i) = v.row(perm[i]);
        const auto a = clusters(OpinionState(v), 0.05);
        const auto b = clusters(OpinionState(pv), 0.05);
        ASSERT_EQ(a.count(), b.count());
        // Agent i in the permuted state is agent perm[i] in the original.
        auto label_of = [](const ClusterProfile& p, std::size_t n_agents) {
            std::vector<std::size_t> label(n_agents);
            for (std::size_t c = 0; c < p.count(); ++c)
                for (auto i : p.clusters[c].members) label[i] = c;
            return label;
        };
        const auto la = label_of(a, n), lb = label_of(b, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(lb[i] == lb[j], la[perm[i]] == la[perm[j]]);
    }
}

TEST(Classify, BalancedAltafiniPolarizes) {
    RngStream rng(72, 0);
    for (int t = 0; t < 10; ++t) {
        const std::size_t n = 3 + rng.index(5);
        auto signs = oracle::random_signs(rng, n);
        signs[0] = 1;
        signs[1] = -1;
        const Matrix a = oracle::gauge(oracle::random_strong_positive(rng, n), signs);
        const OpinionState x0 = oracle::uniform_scalar(rng, n, -1, 1);
        const auto traj = flow_simulate(WeightSpec::constant(WeightKind::Signed, a), x0, 200.0, 0.05, true, {100});
        const auto pred = predict_bipartite_consensus(SignedGraph(a), x0);
        if (std::abs((*pred.limit)[0]) < 1e-3) continue;
        const Outcome o = classify(traj, 1e-6);
        ASSERT_EQ(o.kind, OutcomeKind::Polarization);
        EXPECT_GT(o.values[0], 0.0);
        EXPECT_NEAR(o.values[0], -o.values[1], 1e-6);

        // Global sign flip swaps the camps.
        Trajectory flipped;
        for (std::size_t k = 0; k < traj.size(); ++k) flipped.push(OpinionState(Matrix(-traj.states[k].values())), traj.stamps[k]);
        const Outcome f = classify(flipped, 1e-6);
        ASSERT_EQ(f.kind, OutcomeKind::Polarization);
        EXPECT_EQ(f.camps[0], o.camps[1]);
        EXPECT_EQ(f.camps[1], o.camps[0]);
    }
}

TEST(Classify, ImbalancedIsConsensusAtZero) {
    RngStream rng(73, 0);
    for (int t = 0; t < 10; ++t) {
        const std::size_t n = 3 + rng.index(5);
        const Matrix a = oracle::random_imbalanced_strong(rng, n);
        const auto traj = flow_simulate(WeightSpec::constant(WeightKind::Signed, a), oracle::uniform_scalar(rng, n, -1, 1),
                                        2000.0, 0.05, true, {1000});
        const Outcome o = classify(traj, 1e-6);
        ASSERT_EQ(o.kind, OutcomeKind::Consensus);
        EXPECT_NEAR(o.values[0], 0.0, 1e-6);
    }
}

TEST(Classify, HkSmallConfidenceClusters) {
    RngStream rng(74, 0);
    const auto traj = simulate_bc(hk_stepper(ConfidenceSpec::symmetric(0.05)), oracle::uniform_scalar(rng, 100));
    const Outcome o = classify(traj, 1e-6);
    EXPECT_EQ(o.kind, OutcomeKind::Clusters);
    EXPECT_GT(o.count, 1u);
}

TEST(Classify, NotConvergedAndErrors) {
    const auto moving = from_states({OpinionState::scalar({0, 1}), OpinionState::scalar({0.2, 0.8})});
    EXPECT_EQ(classify(moving, 1e-6).kind, OutcomeKind::NotConverged);
    EXPECT_THROW(classify(Trajectory{}, 1e-6), InvalidArgument);
    EXPECT_THROW(classify(moving, 0.0), InvalidArgument);
}

TEST(ModulusConsensus, Examples) {
    EXPECT_TRUE(modulus_consensus(OpinionState::scalar({0.7, -0.7, 0.7}), 1e-9));
    EXPECT_FALSE(modulus_consensus(OpinionState::scalar({1, 0.5}), 1e-3));
    const double xi = 0.6;
    EXPECT_FALSE(modulus_consensus(OpinionState::scalar({xi, -xi, xi / 3}), 1e-6));
    EXPECT_THROW(modulus_consensus(OpinionState::points({{1, 1}}), 1e-6), InvalidArgument);
}

TEST(TwoR, BoundsAndDeterminism) {
    const std::vector<double> ds{0.05, 0.1, 0.25, 1.0, 1.5};
    const auto rows = two_r_experiment(60, ds, 8, 5);
    const auto again = two_r_experiment(60, ds, 8, 5);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        EXPECT_EQ(rows[r].counts, again[r].counts);
        EXPECT_EQ(rows[r].conjecture, std::lround(1.0 / (2.0 * ds[r])));
        for (auto c : rows[r].counts) {
            EXPECT_GE(c, 1u);
            EXPECT_LE(c, static_cast<std::size_t>(std::floor(1.0 / ds[r])) + 1);
            if (ds[r] >= 1.0) EXPECT_EQ(c, 1u);
        }
    }
    EXPECT_THROW(two_r_experiment(10, ds, 0, 1), InvalidArgument);
}

TEST(TwoR, NonMonotonicityFinder) {
    std::vector<TwoRRow> rows(3);
    rows[0].d = 0.2, rows[0].mean_clusters = 3;
    rows[1].d = 0.1, rows[1].mean_clusters = 4;
    rows[2].d = 0.15, rows[2].mean_clusters = 3.5;
    EXPECT_FALSE(find_nonmonotonicity(rows));
    rows[0].mean_clusters = 3.6;
    const auto pair = find_nonmonotonicity(rows);
    ASSERT_TRUE(pair);
    EXPECT_EQ(pair->first, 0.15);
    EXPECT_EQ(pair->second, 0.2);
}

TEST(Io, TrajectoryCsvRoundTrip) {
    RngStream rng(75, 0);
    Trajectory t;
    for (int k = 0; k < 5; ++k) {
        Matrix v(4, 2);
        for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform(-1e3, 1e3) / 3.0;
        t.push(OpinionState(v), 0.1 * k);
    }
    const std::string csv = io::trajectory_to_csv(t);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,time,agent,dim,value");
    const Trajectory back = io::trajectory_from_csv(csv);
    ASSERT_EQ(back.size(), t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        EXPECT_EQ(back.states[k], t.states[k]);
        EXPECT_EQ(back.stamps[k], t.stamps[k]);
    }
    EXPECT_EQ(io::trajectory_to_csv(back), csv);
    EXPECT_THROW(io::trajectory_from_csv("a,b\n"), InvalidArgument);
    EXPECT_THROW(io::trajectory_from_csv("step,time,agent,dim,value\n0,0,0,0,1\n0,0,1,0,1\n1,1,0,0,1\n"), InvalidArgument);
}

TEST(Io, MatrixAndStateRoundTrips) {
    Matrix m(2, 3);
    m << 1.0 / 3, -2, 1e-300, 0, 5e10, -0.1;
    EXPECT_EQ(io::matrix_from_csv(io::matrix_to_csv(m)), m);
    EXPECT_EQ(io::matrix_from_json(io::matrix_to_json(m)), m);
    const auto x = OpinionState::scalar({0.1, 0.2});
    EXPECT_EQ(io::state_from_json(io::state_to_json(x)), x);
    const auto p = OpinionState::points({{1, 2}, {3, 4}});
    EXPECT_EQ(io::state_from_json(io::state_to_json(p)), p);
    EXPECT_THROW(io::state_from_json(json::array()), InvalidArgument);
    EXPECT_THROW(io::matrix_from_json(json::parse("[[1,2],[3]]")), InvalidArgument);

    const fs::path dir = scratch("matrix");
    io::atomic_write(dir / "w.csv", io::matrix_to_csv(m));
    EXPECT_EQ(io::load_matrix(json{{"file", "w.csv"}}, dir), m);
    EXPECT_THROW(io::load_matrix(json{{"file", "missing.csv"}}, dir), InvalidArgument);
    EXPECT_FALSE(fs::exists(dir / "w.csv.tmp"));
}

TEST(Io, ScheduleAndEvents) {
    Schedule s{{{1.5, Matrix::Identity(2, 2)}, {3, Matrix::Ones(2, 2) * 0.5}}, true};
    const Schedule back = io::schedule_from_json(io::schedule_to_json(s), true);
    ASSERT_EQ(back.segments.size(), 2u);
    EXPECT_EQ(back.segments[1].until, 3.0);
    EXPECT_EQ(back.segments[1].matrix, s.segments[1].matrix);
    EXPECT_EQ(io::events_to_csv({{0, 1, 2, true}, {1, 2, 0, false}}), "step,i,j,interacted\n0,1,2,1\n1,2,0,0\n");
    EXPECT_EQ(io::format_double(0.1), "0.10000000000000001");
}

TEST(Io, TwoRTable) {
    TwoRRow r;
    r.d = 0.25, r.trials = 2, r.mean_clusters = 2.5, r.std_clusters = 0.5, r.conjecture = 2, r.counts = {2, 3};
    EXPECT_EQ(io::two_r_to_csv({r}), "d,trials,mean_clusters,std,conjecture\n0.25,2,2.5,0.5,2\n");
    EXPECT_EQ(io::two_r_to_json({r})[0]["counts"], json({2, 3}));
}

TEST(Cli, PresetsListed) {
    const auto& list = cli::presets();
    EXPECT_GE(list.size(), 7u);
    for (const char* name : {"table1", "tetrahedron-merge", "altafini3", "fj-gossip4", "dw-basic", "hk-termination-sweep",
                             "heterophily"})
        EXPECT_NO_THROW(cli::find_preset(name)) << name;
    EXPECT_THROW(cli::find_preset("nope"), cli::StageError);
}

TEST(Cli, Altafini3Classification) {
    const fs::path out = scratch("altafini3");
    const auto ctx = cli::make_context("altafini3", std::nullopt, std::nullopt, std::nullopt, out.string());
    cli::write_outputs(ctx, cli::simulate(ctx));
    const json c = read_json(out / "classification.json");
    EXPECT_TRUE(c["family_check"]["in_family"].get<bool>());
    EXPECT_LT(c["family_check"]["max_error"].get<double>(), 1e-6);
    EXPECT_FALSE(c["family_check"]["modulus_consensus"].get<bool>());
    const json b = read_json(out / "balance.json");
    EXPECT_FALSE(b["balanced"].get<bool>());
    EXPECT_TRUE(fs::exists(out / "trajectory.csv"));
}

TEST(Cli, FjGossip4Summary) {
    const fs::path out = scratch("fj4");
    const auto ctx = cli::make_context("fj-gossip4", std::nullopt, std::nullopt, std::string("json"), out.string());
    cli::write_outputs(ctx, cli::simulate(ctx));
    const json s = read_json(out / "summary.json");
    const std::vector<double> target{60, 60, 75, 75};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s["cesaro_final"][i].get<double>(), target[i], 2.0);
    EXPECT_EQ(s["seed"], 1);
    EXPECT_TRUE(fs::exists(out / "trajectory.json"));
}

TEST(Cli, TetrahedronAndTable) {
    const fs::path out = scratch("tet");
    const auto ctx = cli::make_context("tetrahedron-merge", std::nullopt, std::nullopt, std::nullopt, out.string());
    const auto r = cli::simulate(ctx);
    EXPECT_EQ(r.trajectory.terminated_at, std::optional<std::size_t>(3));
    cli::write_outputs(ctx, r);
    EXPECT_EQ(read_json(out / "classification.json")["label"], "consensus");

    // A reduced table1 through a config overlay: preset, then file, then flags.
    const fs::path cfg = out / "small.json";
    io::atomic_write(cfg, R"({"n": 30, "trials": 3, "seed": 9})");
    const auto tctx = cli::make_context("table1", cfg.string(), std::uint64_t{4}, std::nullopt, out.string());
    EXPECT_EQ(tctx.config["seed"], 4);
    EXPECT_EQ(tctx.config["n"], 30);
    cli::run_experiment(tctx);
    const std::string csv = io::read_file(out / "two_r.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "d,trials,mean_clusters,std,conjecture");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(Cli, ByteIdenticalRerun) {
    for (const char* preset : {"dw-basic", "heterophily"}) {
        const fs::path a = scratch(std::string("rerun_a_") + preset), b = scratch(std::string("rerun_b_") + preset);
        for (const auto& dir : {a, b}) {
            const auto ctx = cli::make_context(preset, std::nullopt, std::uint64_t{17}, std::nullopt, dir.string());
            cli::write_outputs(ctx, cli::simulate(ctx));
        }
        for (const auto& entry : fs::directory_iterator(a))
            EXPECT_EQ(io::read_file(entry.path()), io::read_file(b / entry.path().filename())) << entry.path();
    }
}

TEST(Cli, ConfigErrors) {
    const fs::path dir = scratch("errors");
    EXPECT_THROW(cli::make_context(std::nullopt, std::nullopt, std::nullopt, std::nullopt, std::nullopt), cli::StageError);
    EXPECT_THROW(cli::make_context(std::nullopt, (dir / "none.json").string(), std::nullopt, std::nullopt, std::nullopt),
                 cli::StageError);
    io::atomic_write(dir / "bad.json", "{not json");
    EXPECT_THROW(cli::make_context(std::nullopt, (dir / "bad.json").string(), std::nullopt, std::nullopt, std::nullopt),
                 cli::StageError);
    io::atomic_write(dir / "hk.json", R"({"model": "hk", "params": {"d": -1}, "x0": [0, 1], "horizon": 10})");
    const auto ctx = cli::make_context(std::nullopt, (dir / "hk.json").string(), std::nullopt, std::nullopt, dir.string());
    EXPECT_THROW(cli::simulate(ctx), InvalidArgument);
    io::atomic_write(dir / "unknown.json", R"({"model": "voter", "x0": [0, 1]})");
    const auto uctx = cli::make_context(std::nullopt, (dir / "unknown.json").string(), std::nullopt, std::nullopt, dir.string());
    EXPECT_THROW(cli::simulate(uctx), cli::StageError);
    const json e = io::error_json("config", "bad", "fix it");
    EXPECT_EQ(e, json({{"stage", "config"}, {"message", "bad"}, {"hint", "fix it"}}));
}

TEST(Cli, AnalyzeStoredTrajectory) {
    const fs::path dir = scratch("analyze");
    const auto traj = simulate_bc(hk_stepper(ConfidenceSpec::symmetric(0.1)), OpinionState::scalar({0, 0.05, 0.5, 0.55}));
    io::atomic_write(dir / "t.csv", io::trajectory_to_csv(traj));
    cli::AnalyzeRequest req;
    req.trajectory = (dir / "t.csv").string();
    req.gap_tol = 0.1;
    const json j = cli::analyze(req);
    EXPECT_EQ(j["clusters"]["count"], 2);
    // The stored file carries no termination flag and the last recorded step still moved.
    EXPECT_EQ(j["classification"]["label"], "not_converged");
    EXPECT_EQ(j["records"], 2);

    io::atomic_write(dir / "a.csv", "0,-1\n-1,0\n");
    cli::AnalyzeRequest breq;
    breq.balance = (dir / "a.csv").string();
    const json b = cli::analyze(breq);
    EXPECT_TRUE(b["balanced"].get<bool>());
    EXPECT_TRUE(b["strongly_connected"].get<bool>());
}
