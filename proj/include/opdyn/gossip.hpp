#pragma once

// Asynchronous randomized pairwise models: gossip averaging, gossip
// Friedkin-Johnsen and Deffuant-Weisbuch. Every run is a pure function of
// (model, x0, steps, RngSeed).

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "opdyn/error.hpp"
#include "opdyn/linear_dynamics.hpp"
#include "opdyn/rng.hpp"
#include "opdyn/types.hpp"

namespace opdyn {

/// Agent i (uniform) copies a fraction gamma_i of the way toward j ~ row i of P.
struct DegrootGossip {
    Matrix p;
    std::vector<double> gamma;
};

/// i uniform, j ~ row i of P; both jump to the midpoint.
struct SymmetricPair {
    Matrix p;
};

using Arc = std::pair<std::size_t, std::size_t>;

/// Arc (i, j) uniform over `arcs`; x_i <- (1 - g1_ij - g2_ij) x_i + g1_ij x_j + g2_ij u_i.
struct GossipFJ {
    Matrix g1, g2;
    Matrix u;  ///< n x m prejudices
    std::vector<Arc> arcs;
};

enum class DwMode { Symmetric, Asymmetric };

struct DW {
    double d = 0.0;
    double mu = 0.5;
    DwMode mode = DwMode::Symmetric;
};

/// Unordered pair; each side moves iff the gap is within its own bound.
struct DWHeterogeneous {
    std::vector<double> d;
    double mu = 0.5;
};

using GossipModel = std::variant<DegrootGossip, SymmetricPair, GossipFJ, DW, DWHeterogeneous>;

/// Gamma1 = Lambda W, Gamma2 = (I - Lambda) W.
inline std::pair<Matrix, Matrix> build_gammas(const std::vector<double>& lambda, const Matrix& w) {
    require_square(w, lambda.size(), "build_gammas");
    Matrix g1 = w, g2 = w;
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        const double l = lambda[i];
        if (!(l >= 0.0 && l <= 1.0)) throw InvalidArgument("build_gammas: lambda must lie in [0, 1]");
        g1.row(static_cast<Eigen::Index>(i)) *= l;
        g2.row(static_cast<Eigen::Index>(i)) *= 1.0 - l;
    }
    return {std::move(g1), std::move(g2)};
}

/// Arcs (i, j) with w_ij != 0, row-major. Self-loops are kept so that sampling
/// (i, i) pulls agent i toward its prejudice with weight gamma2_ii.
inline std::vector<Arc> support_arcs(const Matrix& w) {
    std::vector<Arc> arcs;
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            if (w(i, j) != 0.0) arcs.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    return arcs;
}

/// Canonical gossip FJ model for a stochastic W, susceptibilities lambda and prejudices u.
inline GossipFJ make_gossip_fj(const Matrix& w, const std::vector<double>& lambda, const Matrix& u) {
    if (!is_stochastic(w)) throw InvalidArgument("gossip FJ needs a stochastic W");
    auto [g1, g2] = build_gammas(lambda, w);
    return GossipFJ{std::move(g1), std::move(g2), u, support_arcs(w)};
}

namespace detail {

inline void check_dw_bound(double d) {
    if (!(d > 0.0) || !std::isfinite(d)) throw InvalidArgument("DW confidence bound must be positive");
}
inline void check_mu(double mu) {
    if (!(mu > 0.0 && mu < 1.0)) throw InvalidArgument("DW convergence parameter must lie in (0, 1)");
}

} // namespace detail

/// Throws unless `model` is well formed for state x.
inline void validate_gossip(const GossipModel& model, const OpinionState& x) {
    const std::size_t n = x.n();
    std::visit(
        [&](const auto& g) {
            using G = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<G, DegrootGossip>) {
                require_square(g.p, n, "gossip P");
                if (!is_stochastic(g.p)) throw InvalidArgument("gossip P must be stochastic");
                if (g.p.diagonal().cwiseAbs().maxCoeff() != 0.0)
                    throw InvalidArgument("gossip P must have a zero diagonal");
                if (g.gamma.size() != n) throw InvalidArgument("gossip needs one gain per agent");
                for (double v : g.gamma)
                    if (!(v > 0.0 && v < 1.0)) throw InvalidArgument("gossip gains must lie in (0, 1)");
            } else if constexpr (std::is_same_v<G, SymmetricPair>) {
                require_square(g.p, n, "pair-selection P");
                if (!is_stochastic(g.p)) throw InvalidArgument("pair-selection P must be stochastic");
            } else if constexpr (std::is_same_v<G, GossipFJ>) {
                require_square(g.g1, n, "Gamma1");
                require_square(g.g2, n, "Gamma2");
                if (static_cast<std::size_t>(g.u.rows()) != n || static_cast<std::size_t>(g.u.cols()) != x.m())
                    throw InvalidArgument("gossip FJ prejudices must be n x m");
                if (g.arcs.empty()) throw InvalidArgument("gossip FJ arc set is empty");
                if ((g.g1.array() < 0.0).any() || (g.g2.array() < 0.0).any())
                    throw InvalidArgument("Gamma1 and Gamma2 must be nonnegative");
                if (((g.g1 + g.g2).array() > 1.0 + kRowSumTol).any())
                    throw InvalidArgument("gamma1_ij + gamma2_ij must not exceed 1");
                Eigen::MatrixXi on_arc = Eigen::MatrixXi::Zero(g.g1.rows(), g.g1.cols());
                for (auto [i, j] : g.arcs) {
                    if (i >= n || j >= n) throw InvalidArgument("gossip FJ arc out of range");
                    on_arc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1;
                }
                for (Eigen::Index i = 0; i < g.g1.rows(); ++i)
                    for (Eigen::Index j = 0; j < g.g1.cols(); ++j)
                        if (g.g1(i, j) + g.g2(i, j) != 0.0 && !on_arc(i, j))
                            throw InvalidArgument("Gamma1 + Gamma2 must be supported on the arc set");
            } else if constexpr (std::is_same_v<G, DW>) {
                detail::check_dw_bound(g.d);
                detail::check_mu(g.mu);
                if (x.m() != 1) throw InvalidArgument("DW is defined for scalar opinions");
                if (n < 2) throw InvalidArgument("DW needs at least two agents");
            } else {
                if (g.d.size() != n) throw InvalidArgument("heterogeneous DW needs one bound per agent");
                for (double d : g.d) detail::check_dw_bound(d);
                detail::check_mu(g.mu);
                if (x.m() != 1) throw InvalidArgument("DW is defined for scalar opinions");
                if (n < 2) throw InvalidArgument("DW needs at least two agents");
            }
        },
        model);
}

namespace detail {

inline std::size_t sample_row(const Matrix& p, std::size_t i, RngStream& rng) {
    const auto row = p.row(static_cast<Eigen::Index>(i));
    const double total = row.sum();
    if (!(total > 0.0)) throw InvalidArgument("cannot sample from a zero row of P");
    const double target = rng.uniform01() * total;
    double acc = 0.0;
    std::size_t last = 0;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
        if (row(j) <= 0.0) continue;
        acc += row(j);
        last = static_cast<std::size_t>(j);
        if (target < acc) return last;
    }
    return last;
}

/// Two distinct agents, uniform over ordered pairs.
inline std::pair<std::size_t, std::size_t> distinct_pair(std::size_t n, RngStream& rng) {
    const std::size_t i = rng.index(n);
    std::size_t j = rng.index(n - 1);
    if (j >= i) ++j;
    return {i, j};
}

} // namespace detail

/// One asynchronous step, in place. Only the agents named by the variant change.
/// The model is assumed validated against x.
inline InteractionEvent gossip_step_inplace(const GossipModel& model, OpinionState& x, std::size_t step,
                                            RngStream& rng) {
    Matrix& v = x.values();
    return std::visit(
        [&](const auto& g) -> InteractionEvent {
            using G = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<G, DegrootGossip>) {
                const std::size_t i = rng.index(x.n());
                const std::size_t j = detail::sample_row(g.p, i, rng);
                const auto ri = static_cast<Eigen::Index>(i), rj = static_cast<Eigen::Index>(j);
                v.row(ri) = (1.0 - g.gamma[i]) * v.row(ri) + g.gamma[i] * v.row(rj);
                return {step, i, j, true};
            } else if constexpr (std::is_same_v<G, SymmetricPair>) {
                const std::size_t i = rng.index(x.n());
                const std::size_t j = detail::sample_row(g.p, i, rng);
                const auto ri = static_cast<Eigen::Index>(i), rj = static_cast<Eigen::Index>(j);
                const Eigen::RowVectorXd mid = 0.5 * (v.row(ri) + v.row(rj));
                v.row(ri) = mid;
                v.row(rj) = mid;
                return {step, i, j, true};
            } else if constexpr (std::is_same_v<G, GossipFJ>) {
                const auto [i, j] = g.arcs[rng.index(g.arcs.size())];
                const auto ri = static_cast<Eigen::Index>(i), rj = static_cast<Eigen::Index>(j);
                const double a = g.g1(ri, rj), b = g.g2(ri, rj);
                v.row(ri) = (1.0 - a - b) * v.row(ri) + a * v.row(rj) + b * g.u.row(ri);
                return {step, i, j, true};
            } else if constexpr (std::is_same_v<G, DW>) {
                const auto [i, j] = detail::distinct_pair(x.n(), rng);
                const double gap = x[j] - x[i];
                if (std::abs(gap) > g.d) return {step, i, j, false};
                const double delta = g.mu * gap;
                x[i] += delta;
                if (g.mode == DwMode::Symmetric) x[j] -= delta;
                return {step, i, j, true};
            } else {
                const auto [i, j] = detail::distinct_pair(x.n(), rng);
                const double gap = x[j] - x[i];
                const bool move_i = std::abs(gap) <= g.d[i];
                const bool move_j = std::abs(gap) <= g.d[j];
                const double delta = g.mu * gap;
                if (move_i) x[i] += delta;
                if (move_j) x[j] -= delta;
                return {step, i, j, move_i || move_j};
            }
        },
        model);
}

/// Functional form of one step.
inline std::pair<OpinionState, InteractionEvent> gossip_step(const GossipModel& model, const OpinionState& x,
                                                             RngStream& rng, std::size_t step = 0) {
    validate_gossip(model, x);
    OpinionState next = x;
    const InteractionEvent ev = gossip_step_inplace(model, next, step, rng);
    return {std::move(next), ev};
}

/// Running arithmetic mean of states, updated as mean += (x - mean) / count.
class CesaroAccumulator {
public:
    void add(const OpinionState& x) {
        ++count_;
        if (count_ == 1) {
            mean_ = x.values();
            return;
        }
        mean_ += (x.values() - mean_) / static_cast<double>(count_);
    }

    std::size_t count() const noexcept { return count_; }

    OpinionState mean() const {
        if (count_ == 0) throw InvalidArgument("Cesaro average of an empty sequence");
        return OpinionState(mean_);
    }

private:
    std::size_t count_ = 0;
    Matrix mean_;
};

struct GossipOptions {
    std::size_t record_every = 1;  ///< keep x(k) when k is a multiple; x(0) and x(steps) are always kept
    bool record_events = true;
    bool track_cesaro = false;     ///< accumulate the running average of every x(k), k = 0..steps
};

struct GossipRun {
    Trajectory trajectory;
    std::optional<OpinionState> cesaro_final;
};

inline GossipRun run_gossip(const GossipModel& model, const OpinionState& x0, std::size_t steps, RngSeed seed,
                            GossipOptions options = {}) {
    if (steps < 1) throw InvalidArgument("gossip run needs steps >= 1");
    if (options.record_every < 1) throw InvalidArgument("record_every must be >= 1");
    validate_gossip(model, x0);
    RngStream rng(seed);
    GossipRun run;
    CesaroAccumulator avg;
    OpinionState x = x0;
    run.trajectory.push(x, 0.0);
    if (options.track_cesaro) avg.add(x);
    if (options.record_events) run.trajectory.events.reserve(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const InteractionEvent ev = gossip_step_inplace(model, x, k, rng);
        if (options.record_events) run.trajectory.events.push_back(ev);
        if (options.track_cesaro) avg.add(x);
        if ((k + 1) % options.record_every == 0 || k + 1 == steps)
            run.trajectory.push(x, static_cast<double>(k + 1));
    }
    if (!x.values().allFinite()) throw NumericalBreakdown("gossip run produced non-finite opinions");
    if (options.track_cesaro) run.cesaro_final = avg.mean();
    return run;
}

/// Full trajectory of a gossip run with one event per step.
inline Trajectory simulate_gossip(const GossipModel& model, const OpinionState& x0, std::size_t steps,
                                  RngSeed seed) {
    return run_gossip(model, x0, steps, seed).trajectory;
}

/// Running averages of the recorded states.
inline std::vector<OpinionState> cesaro(const Trajectory& traj) {
    if (traj.empty()) throw InvalidArgument("Cesaro average of an empty trajectory");
    CesaroAccumulator avg;
    std::vector<OpinionState> out;
    out.reserve(traj.size());
    for (const auto& x : traj.states) {
        avg.add(x);
        out.push_back(avg.mean());
    }
    return out;
}

/// (gamma / (1 - gamma)) * sum_{s=1}^{depth} (1 - gamma)^s xi_s for given bits.
inline double bernoulli_convolution(double gamma, std::span<const int> bits) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("Bernoulli convolution needs gamma in (0, 1)");
    if (bits.empty()) throw InvalidArgument("Bernoulli convolution needs depth >= 1");
    const double r = 1.0 - gamma;
    double weight = r, acc = 0.0;
    for (int b : bits) {
        if (b) acc += weight;
        weight *= r;
    }
    return gamma / r * acc;
}

inline double bernoulli_convolution(double gamma, std::size_t depth, RngStream& rng) {
    if (depth < 1) throw InvalidArgument("Bernoulli convolution needs depth >= 1");
    std::vector<int> bits(depth);
    for (auto& b : bits) b = rng.coin() ? 1 : 0;
    return bernoulli_convolution(gamma, bits);
}

} // namespace opdyn
