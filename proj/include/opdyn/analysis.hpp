#pragma once

// Post-hoc analytics: s-energies, clustering, outcome labels and the 2R
// cluster-count experiment.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "opdyn/bounded_confidence.hpp"
#include "opdyn/error.hpp"
#include "opdyn/gossip.hpp"
#include "opdyn/rng.hpp"
#include "opdyn/types.hpp"

namespace opdyn {

struct SEnergy {
    double total = 0.0;    ///< E(s)
    double kinetic = 0.0;  ///< K(s)
};

/// Truncated s-energies over the recorded horizon. pairs_per_step[k] lists the
/// interactions active in the transition x(k) -> x(k+1).
inline SEnergy s_energy(const Trajectory& traj, const std::vector<std::vector<Arc>>& pairs_per_step, double s) {
    if (!(s > 0.0)) throw InvalidArgument("s-energy exponent must be positive");
    if (traj.empty()) throw InvalidArgument("s-energy of an empty trajectory");
    const std::size_t steps = traj.size() - 1;
    if (pairs_per_step.size() < steps) throw InvalidArgument("s-energy: missing interaction records");
    SEnergy e;
    for (std::size_t k = 0; k < steps; ++k) {
        const OpinionState& x = traj.states[k];
        const OpinionState& y = traj.states[k + 1];
        for (auto [i, j] : pairs_per_step[k]) {
            if (i >= x.n() || j >= x.n()) throw InvalidArgument("s-energy: pair out of range");
            e.total += std::pow(x.distance(i, j), s);
        }
        for (std::size_t i = 0; i < x.n(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            e.kinetic += std::pow((y.values().row(r) - x.values().row(r)).norm(), s);
        }
    }
    return e;
}

/// Interaction pairs of an HK run: the trust-set support at every recorded state.
inline std::vector<std::vector<Arc>> hk_pairs(const Trajectory& traj, const ConfidenceSpec& spec) {
    std::vector<std::vector<Arc>> out;
    out.reserve(traj.size());
    for (const auto& x : traj.states) out.push_back(hk_interactions(x, spec));
    return out;
}

/// Realized pair of every step of a gossip run (needs one event per step).
inline std::vector<std::vector<Arc>> gossip_pairs(const Trajectory& traj) {
    std::vector<std::vector<Arc>> out;
    out.reserve(traj.events.size());
    for (const auto& ev : traj.events) {
        if (ev.interacted) out.push_back({{ev.i, ev.j}});
        else out.emplace_back();
    }
    return out;
}

struct Cluster {
    Eigen::RowVectorXd representative;  ///< mean of the members
    std::vector<std::size_t> members;   ///< ascending agent indices
};

struct ClusterProfile {
    std::vector<Cluster> clusters;  ///< scalar: ascending representative; otherwise by smallest member
    double min_separation = std::numeric_limits<double>::infinity();
    double gap_tol = 0.0;

    std::size_t count() const noexcept { return clusters.size(); }
};

/// Single-linkage grouping: agents closer than or at gap_tol share a cluster.
inline ClusterProfile clusters(const OpinionState& x, double gap_tol) {
    if (!(gap_tol > 0.0)) throw InvalidArgument("gap_tol must be positive");
    const std::size_t n = x.n();
    std::vector<std::size_t> label(n);
    std::size_t count = 0;
    if (x.m() == 1) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
        label[order[0]] = 0;
        for (std::size_t k = 1; k < n; ++k) {
            if (x[order[k]] - x[order[k - 1]] > gap_tol) ++count;
            label[order[k]] = count;
        }
        ++count;
    } else {
        std::vector<std::size_t> parent(n);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](std::size_t a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (x.distance(i, j) <= gap_tol) {
                    const std::size_t a = find(i), b = find(j);
                    if (a != b) parent[std::max(a, b)] = std::min(a, b);
                }
        std::vector<std::size_t> root_label(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t r = find(i);
            if (root_label[r] == n) root_label[r] = count++;
            label[i] = root_label[r];
        }
    }

    ClusterProfile out;
    out.gap_tol = gap_tol;
    out.clusters.resize(count);
    for (std::size_t i = 0; i < n; ++i) out.clusters[label[i]].members.push_back(i);
    for (auto& c : out.clusters) {
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(x.m()));
        for (std::size_t i : c.members) acc += x.values().row(static_cast<Eigen::Index>(i));
        c.representative = acc / static_cast<double>(c.members.size());
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (label[i] != label[j]) out.min_separation = std::min(out.min_separation, x.distance(i, j));
    return out;
}

enum class OutcomeKind { NotConverged, Consensus, Polarization, Clusters };

inline const char* to_string(OutcomeKind k) {
    switch (k) {
    case OutcomeKind::NotConverged: return "not_converged";
    case OutcomeKind::Consensus: return "consensus";
    case OutcomeKind::Polarization: return "polarization";
    case OutcomeKind::Clusters: return "clusters";
    }
    return "unknown";
}

struct Outcome {
    OutcomeKind kind = OutcomeKind::NotConverged;
    std::size_t count = 0;                          ///< number of opinion groups
    std::vector<std::vector<std::size_t>> camps;    ///< Polarization: positive camp first
    std::vector<double> values;                     ///< group values (scalar opinions)
};

/// Labels the end of a trajectory; the final increment is the change between the
/// last two recorded states unless the run terminated exactly.
inline Outcome classify(const Trajectory& traj, double tol) {
    if (traj.empty()) throw InvalidArgument("cannot classify an empty trajectory");
    if (!(tol > 0.0)) throw InvalidArgument("classification tolerance must be positive");
    Outcome out;
    const OpinionState& last = traj.back();
    if (!traj.terminated_at) {
        if (traj.size() < 2 || max_abs_diff(last, traj.states[traj.size() - 2]) > tol) return out;
    }
    if (last.diameter() < tol) {
        out.kind = OutcomeKind::Consensus;
        out.count = 1;
        out.values = {last.values().col(0).mean()};
        return out;
    }
    const double gap_tol = std::max(tol, 1e-4 * traj.front().diameter());
    const ClusterProfile profile = clusters(last, gap_tol);
    out.count = profile.count();
    for (const auto& c : profile.clusters) out.values.push_back(c.representative(0));
    if (last.m() == 1 && profile.count() == 2) {
        const double v1 = profile.clusters[0].representative(0);
        const double v2 = profile.clusters[1].representative(0);
        if (std::abs(v1 + v2) < tol * (1.0 + std::abs(v1))) {
            out.kind = OutcomeKind::Polarization;
            out.camps = {profile.clusters[1].members, profile.clusters[0].members};
            out.values = {v2, v1};
            return out;
        }
    }
    out.kind = OutcomeKind::Clusters;
    return out;
}

/// max_i | |x_i| - median(|x|) | < tol.
inline bool modulus_consensus(const OpinionState& x, double tol) {
    if (x.m() != 1) throw InvalidArgument("consensus in modulus is defined for scalar opinions");
    std::vector<double> a(x.n());
    for (std::size_t i = 0; i < x.n(); ++i) a[i] = std::abs(x[i]);
    std::vector<double> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = sorted.size() / 2;
    const double median = sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
    for (double v : a)
        if (!(std::abs(v - median) < tol)) return false;
    return true;
}

struct TwoRRow {
    double d = 0.0;
    std::size_t trials = 0;
    double mean_clusters = 0.0;
    double std_clusters = 0.0;  ///< sample standard deviation
    long conjecture = 0;        ///< 1/(2d) rounded to nearest
    std::vector<std::size_t> counts;
};

/// For every trial one initial vector uniform on [0,1]^n is drawn from stream
/// (seed, trial) and run through HK to termination for each d in d_list.
inline std::vector<TwoRRow> two_r_experiment(std::size_t n, const std::vector<double>& d_list, std::size_t trials,
                                             std::uint64_t seed) {
    if (trials < 1) throw InvalidArgument("2R experiment needs trials >= 1");
    if (n < 1) throw InvalidArgument("2R experiment needs n >= 1");
    if (d_list.empty()) throw InvalidArgument("2R experiment needs at least one d");
    std::vector<TwoRRow> rows(d_list.size());
    for (std::size_t r = 0; r < d_list.size(); ++r) {
        if (!(d_list[r] > 0.0)) throw InvalidArgument("2R experiment: d must be positive");
        rows[r].d = d_list[r];
        rows[r].trials = trials;
        rows[r].conjecture = std::lround(1.0 / (2.0 * d_list[r]));
        rows[r].counts.resize(trials);
    }
    BcOptions opts;
    opts.max_steps = std::max<std::size_t>(hk_termination_bound(n), 1) + 1;
    for (std::size_t t = 0; t < trials; ++t) {
        RngStream rng(seed, t);
        std::vector<double> xs(n);
        for (auto& v : xs) v = rng.uniform01();
        const OpinionState x0 = OpinionState::scalar(xs);
        for (std::size_t r = 0; r < d_list.size(); ++r) {
            const Trajectory traj = simulate_bc(hk_stepper(ConfidenceSpec::symmetric(d_list[r])), x0, opts);
            rows[r].counts[t] = clusters(traj.back(), d_list[r]).count();
        }
    }
    for (auto& row : rows) {
        double sum = 0.0;
        for (auto c : row.counts) sum += static_cast<double>(c);
        row.mean_clusters = sum / static_cast<double>(trials);
        double ss = 0.0;
        for (auto c : row.counts) ss += (static_cast<double>(c) - row.mean_clusters) * (static_cast<double>(c) - row.mean_clusters);
        row.std_clusters = trials > 1 ? std::sqrt(ss / static_cast<double>(trials - 1)) : 0.0;
    }
    return rows;
}

/// First adjacent pair d < d' with a strictly smaller mean cluster count at d.
inline std::optional<std::pair<double, double>> find_nonmonotonicity(const std::vector<TwoRRow>& rows) {
    std::vector<const TwoRRow*> sorted;
    for (const auto& r : rows) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->d < b->d; });
    for (std::size_t k = 1; k < sorted.size(); ++k)
        if (sorted[k - 1]->mean_clusters < sorted[k]->mean_clusters) return std::make_pair(sorted[k - 1]->d, sorted[k]->d);
    return std::nullopt;
}

} // namespace opdyn
