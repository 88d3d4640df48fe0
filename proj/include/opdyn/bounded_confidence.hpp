#pragma once

// Hegselmann-Krause family: trust sets, the HK operator and its phi-weighted,
// truth-seeking and inertial relatives, energies, d-chains, and the smoothed
// continuous-time model.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "opdyn/error.hpp"
#include "opdyn/linear_dynamics.hpp"
#include "opdyn/types.hpp"

namespace opdyn {

// ---------------------------------------------------------------------------
// Confidence geometry
// ---------------------------------------------------------------------------

enum class Norm { Euclidean, Max, Sum };

namespace confidence {

struct Symmetric {
    double d;
};
struct Asymmetric {
    double d_left, d_right;
};
struct PerAgentSymmetric {
    std::vector<double> d;
};
/// Interval [x_i - d + eta_i, x_i + d].
struct PerAgentShifted {
    double d;
    std::vector<double> eta;
};
struct PerAgentAsymmetric {
    std::vector<double> d_left, d_right;
};
/// ||x_j - x_i|| <= d_i; a single radius is shared by every agent.
struct NormBall {
    std::vector<double> d;
    Norm norm = Norm::Euclidean;
};

} // namespace confidence

struct ConfidenceSpec {
    using Geometry = std::variant<confidence::Symmetric, confidence::Asymmetric, confidence::PerAgentSymmetric,
                                  confidence::PerAgentShifted, confidence::PerAgentAsymmetric, confidence::NormBall>;

    Geometry geometry = confidence::Symmetric{1.0};
    bool closed = true;  ///< <= at the boundary when true, < otherwise

    static ConfidenceSpec symmetric(double d, bool closed = true) { return {confidence::Symmetric{d}, closed}; }
    static ConfidenceSpec asymmetric(double d_left, double d_right) {
        return {confidence::Asymmetric{d_left, d_right}, true};
    }
    static ConfidenceSpec ball(double d, Norm norm = Norm::Euclidean, bool closed = true) {
        return {confidence::NormBall{{d}, norm}, closed};
    }

    bool is_interval() const { return !std::holds_alternative<confidence::NormBall>(geometry); }

    /// Throws unless the geometry is usable for n agents with m-dimensional opinions.
    void validate(std::size_t n, std::size_t m) const {
        auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
        auto all_positive = [&](const std::vector<double>& v, const char* what) {
            if (v.size() != n) throw InvalidArgument(std::string(what) + ": need one bound per agent");
            for (double x : v)
                if (!positive(x)) throw InvalidArgument(std::string(what) + ": bounds must be positive");
        };
        if (is_interval() && m != 1)
            throw InvalidArgument("interval confidence sets need scalar opinions; use a norm ball for m > 1");
        std::visit(
            [&](const auto& g) {
                using G = std::decay_t<decltype(g)>;
                if constexpr (std::is_same_v<G, confidence::Symmetric>) {
                    if (!positive(g.d)) throw InvalidArgument("confidence bound must be positive");
                } else if constexpr (std::is_same_v<G, confidence::Asymmetric>) {
                    if (!positive(g.d_left) || !positive(g.d_right))
                        throw InvalidArgument("confidence bounds must be positive");
                } else if constexpr (std::is_same_v<G, confidence::PerAgentSymmetric>) {
                    all_positive(g.d, "per-agent confidence");
                } else if constexpr (std::is_same_v<G, confidence::PerAgentShifted>) {
                    if (!positive(g.d)) throw InvalidArgument("confidence bound must be positive");
                    if (g.eta.size() != n) throw InvalidArgument("shifted confidence: need one shift per agent");
                    for (double e : g.eta)
                        if (!(e >= 0.0 && e < g.d))
                            throw InvalidArgument("shifted confidence: need 0 <= eta_i < d");
                } else if constexpr (std::is_same_v<G, confidence::PerAgentAsymmetric>) {
                    all_positive(g.d_left, "per-agent left bounds");
                    all_positive(g.d_right, "per-agent right bounds");
                } else {
                    if (g.d.size() == 1) {
                        if (!positive(g.d.front())) throw InvalidArgument("ball radius must be positive");
                    } else {
                        all_positive(g.d, "per-agent ball radii");
                    }
                }
            },
            geometry);
    }
};

namespace detail {

inline double norm_of(const Eigen::Ref<const Eigen::RowVectorXd>& v, Norm norm) {
    switch (norm) {
    case Norm::Euclidean: return v.norm();
    case Norm::Max: return v.cwiseAbs().maxCoeff();
    case Norm::Sum: return v.cwiseAbs().sum();
    }
    return v.norm();
}

/// Does agent i trust agent j?
inline bool trusts(const OpinionState& x, std::size_t i, std::size_t j, const ConfidenceSpec& spec) {
    if (i == j) return true;
    const bool closed = spec.closed;
    auto within = [closed](double lo, double value, double hi) {
        return closed ? (lo <= value && value <= hi) : (lo < value && value < hi);
    };
    auto below = [closed](double value, double bound) { return closed ? value <= bound : value < bound; };
    return std::visit(
        [&](const auto& g) -> bool {
            using G = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<G, confidence::NormBall>) {
                const double dist = norm_of(x.values().row(static_cast<Eigen::Index>(j)) -
                                                x.values().row(static_cast<Eigen::Index>(i)),
                                            g.norm);
                return below(dist, g.d.size() == 1 ? g.d.front() : g.d[i]);
            } else {
                const double off = x[j] - x[i];
                if constexpr (std::is_same_v<G, confidence::Symmetric>) return below(std::abs(off), g.d);
                else if constexpr (std::is_same_v<G, confidence::Asymmetric>) return within(-g.d_left, off, g.d_right);
                else if constexpr (std::is_same_v<G, confidence::PerAgentSymmetric>) return below(std::abs(off), g.d[i]);
                else if constexpr (std::is_same_v<G, confidence::PerAgentShifted>) return within(-g.d + g.eta[i], off, g.d);
                else return within(-g.d_left[i], off, g.d_right[i]);
            }
        },
        spec.geometry);
}

/// Mean of the member opinions, computed as ref + mean(x_j - ref) with ref the
/// opinion of the lowest-index member. Identical member sets give bit-identical
/// results, and a set of identical opinions maps exactly onto that opinion.
inline Eigen::RowVectorXd member_mean(const OpinionState& x, const std::vector<std::size_t>& members) {
    const Eigen::RowVectorXd ref = x.values().row(static_cast<Eigen::Index>(members.front()));
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(ref.size());
    for (std::size_t j : members) acc += x.values().row(static_cast<Eigen::Index>(j)) - ref;
    return ref + acc / static_cast<double>(members.size());
}

} // namespace detail

/// I_i(x), ascending; always contains i.
inline std::vector<std::size_t> trust_set(const OpinionState& x, std::size_t i, const ConfidenceSpec& spec) {
    spec.validate(x.n(), x.m());
    if (i >= x.n()) throw InvalidArgument("agent index out of range");
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < x.n(); ++j)
        if (detail::trusts(x, i, j, spec)) members.push_back(j);
    return members;
}

inline std::vector<std::vector<std::size_t>> trust_sets(const OpinionState& x, const ConfidenceSpec& spec) {
    spec.validate(x.n(), x.m());
    std::vector<std::vector<std::size_t>> sets(x.n());
    for (std::size_t i = 0; i < x.n(); ++i)
        for (std::size_t j = 0; j < x.n(); ++j)
            if (detail::trusts(x, i, j, spec)) sets[i].push_back(j);
    return sets;
}

/// Ordered pairs (i, j) with j in I_i(x): the support of W(x).
inline std::vector<std::pair<std::size_t, std::size_t>> hk_interactions(const OpinionState& x,
                                                                        const ConfidenceSpec& spec) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    const auto sets = trust_sets(x, spec);
    for (std::size_t i = 0; i < sets.size(); ++i)
        for (std::size_t j : sets[i]) pairs.emplace_back(i, j);
    return pairs;
}

/// Row-stochastic W(x) with rows uniform over the trust sets.
inline Matrix hk_matrix(const OpinionState& x, const ConfidenceSpec& spec) {
    const auto sets = trust_sets(x, spec);
    Matrix w = Matrix::Zero(x.n(), x.n());
    for (std::size_t i = 0; i < sets.size(); ++i)
        for (std::size_t j : sets[i])
            w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0 / static_cast<double>(sets[i].size());
    return w;
}

/// The HK operator: every opinion moves to the mean of its trust set.
inline OpinionState hk_step(const OpinionState& x, const ConfidenceSpec& spec) {
    const auto sets = trust_sets(x, spec);
    OpinionState next = x;
    for (std::size_t i = 0; i < x.n(); ++i)
        next.values().row(static_cast<Eigen::Index>(i)) = detail::member_mean(x, sets[i]);
    return next;
}

/// x_i' = lambda_i * mean(I_i) + (1 - lambda_i) * T.
inline OpinionState truth_step(const OpinionState& x, const std::vector<double>& lambda,
                               const Eigen::RowVectorXd& truth, const ConfidenceSpec& spec) {
    if (lambda.size() != x.n()) throw InvalidArgument("truth_step: need one lambda per agent");
    if (static_cast<std::size_t>(truth.size()) != x.m()) throw InvalidArgument("truth_step: truth has wrong dimension");
    const auto sets = trust_sets(x, spec);
    OpinionState next = x;
    for (std::size_t i = 0; i < x.n(); ++i) {
        const double l = lambda[i];
        if (!(l >= 0.0 && l <= 1.0)) throw InvalidArgument("truth_step: lambda must lie in [0, 1]");
        next.values().row(static_cast<Eigen::Index>(i)) = l * detail::member_mean(x, sets[i]) + (1.0 - l) * truth;
    }
    return next;
}

/// x_i' = (1 - lambda_i) x_i + lambda_i * mean(I_i).
inline OpinionState inertial_step(const OpinionState& x, const std::vector<double>& lambda,
                                  const ConfidenceSpec& spec) {
    if (lambda.size() != x.n()) throw InvalidArgument("inertial_step: need one lambda per agent");
    const auto sets = trust_sets(x, spec);
    OpinionState next = x;
    for (std::size_t i = 0; i < x.n(); ++i) {
        const double l = lambda[i];
        if (!(l >= 0.0 && l <= 1.0)) throw InvalidArgument("inertial_step: lambda must lie in [0, 1]");
        const auto row = static_cast<Eigen::Index>(i);
        next.values().row(row) = (1.0 - l) * x.values().row(row) + l * detail::member_mean(x, sets[i]);
    }
    return next;
}

// ---------------------------------------------------------------------------
// Distance-weighted (phi) models
// ---------------------------------------------------------------------------

using PhiFn = std::function<double(double sigma)>;

/// Weights as functions of the squared distance sigma = |x_j - x_i|^2.
struct PhiSpec {
    using Table = std::vector<std::vector<PhiFn>>;

    std::variant<PhiFn, Table> phi;
    std::optional<PhiFn> antiderivative;  ///< Phi(r) = integral of phi over [0, r]; shared phi only
    std::string name = "custom";

    double weight(std::size_t i, std::size_t j, double sigma) const {
        const double v = std::holds_alternative<PhiFn>(phi) ? std::get<PhiFn>(phi)(sigma)
                                                             : std::get<Table>(phi)[i][j](sigma);
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("phi must be finite and nonnegative");
        return v;
    }

    void validate(std::size_t n) const {
        if (const auto* t = std::get_if<Table>(&phi)) {
            if (t->size() != n) throw InvalidArgument("phi table must be n x n");
            for (const auto& row : *t)
                if (row.size() != n) throw InvalidArgument("phi table must be n x n");
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!(weight(i, i, 0.0) > 0.0)) throw InvalidArgument("phi^{ii} must be a positive constant");
    }

    /// The HK indicator of [0, d^2]; Phi(r) = min(r, d^2).
    static PhiSpec hk(double d) {
        const double d2 = d * d;
        return {PhiFn([d2](double s) { return s <= d2 ? 1.0 : 0.0; }),
                PhiFn([d2](double r) { return std::min(r, d2); }), "hk"};
    }

    /// a on [0, d1^2], b on (d1^2, d2^2), 0 beyond.
    static PhiSpec heterophily(double a, double b, double d1, double d2) {
        if (!(a > 0.0 && a < b && d1 > 0.0 && d1 < d2))
            throw InvalidArgument("heterophily needs 0 < a < b and 0 < d1 < d2");
        const double s1 = d1 * d1, s2 = d2 * d2;
        return {PhiFn([=](double s) { return s <= s1 ? a : (s < s2 ? b : 0.0); }),
                PhiFn([=](double r) { return a * std::min(r, s1) + b * std::clamp(r - s1, 0.0, s2 - s1); }),
                "heterophily"};
    }

    /// phi^{ij}(sigma) = w_j for sigma < d^2.
    static PhiSpec reputation(const std::vector<double>& w, double d) {
        const double d2 = d * d;
        Table table(w.size(), std::vector<PhiFn>(w.size()));
        for (std::size_t i = 0; i < w.size(); ++i)
            for (std::size_t j = 0; j < w.size(); ++j) {
                if (!(w[j] > 0.0)) throw InvalidArgument("reputations must be positive");
                const double wj = w[j];
                table[i][j] = [wj, d2](double s) { return s < d2 ? wj : 0.0; };
            }
        return {std::move(table), std::nullopt, "reputation"};
    }
};

/// x_i' = sum_j phi_ij x_j / sum_j phi_ij.
inline OpinionState phi_step(const OpinionState& x, const PhiSpec& phi) {
    phi.validate(x.n());
    OpinionState next = x;
    for (std::size_t i = 0; i < x.n(); ++i) {
        const auto ri = static_cast<Eigen::Index>(i);
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(x.m()));
        double total = 0.0;
        for (std::size_t j = 0; j < x.n(); ++j) {
            const auto rj = static_cast<Eigen::Index>(j);
            const Eigen::RowVectorXd diff = x.values().row(rj) - x.values().row(ri);
            const double w = phi.weight(i, j, diff.squaredNorm());
            if (w == 0.0) continue;
            acc += w * diff;
            total += w;
        }
        next.values().row(ri) = x.values().row(ri) + acc / total;
    }
    return next;
}

namespace detail {

inline double adaptive_trapezoid(const PhiFn& f, double a, double b, double fa, double fb, double tol, int depth) {
    const double mid = 0.5 * (a + b);
    const double fm = f(mid);
    const double whole = 0.5 * (b - a) * (fa + fb);
    const double halves = 0.25 * (b - a) * (fa + 2.0 * fm + fb);
    if (depth <= 0 || std::abs(halves - whole) <= 3.0 * tol) return halves;
    return adaptive_trapezoid(f, a, mid, fa, fm, 0.5 * tol, depth - 1) +
           adaptive_trapezoid(f, mid, b, fm, fb, 0.5 * tol, depth - 1);
}

} // namespace detail

/// Integral of phi over [0, r] by adaptive trapezoid refinement.
inline double integrate_phi(const PhiFn& phi, double r, double tol = 1e-8) {
    if (r <= 0.0) return 0.0;
    return detail::adaptive_trapezoid(phi, 0.0, r, phi(0.0), phi(r), tol, 48);
}

// ---------------------------------------------------------------------------
// Energies and chains
// ---------------------------------------------------------------------------

/// sum over all ordered pairs (i, j), i = j included, of min(|x_i - x_j|^2, d^2).
inline double hk_energy(const OpinionState& x, double d) {
    const double d2 = d * d;
    double e = 0.0;
    for (std::size_t i = 0; i < x.n(); ++i)
        for (std::size_t j = 0; j < x.n(); ++j) {
            const double s = (x.values().row(static_cast<Eigen::Index>(i)) - x.values().row(static_cast<Eigen::Index>(j)))
                                 .squaredNorm();
            e += std::min(s, d2);
        }
    return e;
}

/// sum over ordered pairs of Phi(|x_i - x_j|^2); Phi from the spec or by quadrature.
inline double phi_energy(const OpinionState& x, const PhiSpec& phi) {
    if (!phi.antiderivative && !std::holds_alternative<PhiFn>(phi.phi))
        throw InvalidArgument("phi_energy needs a shared phi or an explicit antiderivative");
    const PhiFn big_phi = phi.antiderivative ? *phi.antiderivative
                                             : PhiFn([f = std::get<PhiFn>(phi.phi)](double r) { return integrate_phi(f, r); });
    double e = 0.0;
    for (std::size_t i = 0; i < x.n(); ++i)
        for (std::size_t j = 0; j < x.n(); ++j)
            e += big_phi((x.values().row(static_cast<Eigen::Index>(i)) - x.values().row(static_cast<Eigen::Index>(j)))
                             .squaredNorm());
    return e;
}

struct DChainPartition {
    std::vector<std::vector<std::size_t>> chains;  ///< agents in ascending opinion order
    std::vector<double> diameters;

    std::size_t size() const noexcept { return chains.size(); }
};

/// Sorts scalar opinions and splits wherever consecutive gaps exceed d.
inline DChainPartition d_chain_partition(const OpinionState& x, double d) {
    if (x.m() != 1) throw InvalidArgument("d-chains are defined for scalar opinions");
    std::vector<std::size_t> order(x.n());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    DChainPartition out;
    out.chains.push_back({order.front()});
    for (std::size_t k = 1; k < order.size(); ++k) {
        if (x[order[k]] - x[order[k - 1]] > d) out.chains.emplace_back();
        out.chains.back().push_back(order[k]);
    }
    for (const auto& c : out.chains) out.diameters.push_back(x[c.back()] - x[c.front()]);
    return out;
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

using Stepper = std::function<OpinionState(const OpinionState&)>;

class MaxStepsExceeded : public Error {
public:
    MaxStepsExceeded(std::size_t steps, Trajectory partial)
        : Error("no fixed point within " + std::to_string(steps) + " steps"), partial_(std::move(partial)) {}

    const Trajectory& partial() const noexcept { return partial_; }

private:
    Trajectory partial_;
};

struct BcOptions {
    std::size_t max_steps = 100000;
    double stop_tol = 0.0;             ///< 0: stop on exact fixed point
    bool require_termination = true;  ///< throw MaxStepsExceeded when the budget runs out
};

/// Iterates `step` from x0. terminated_at is the first k with |x(k+1) - x(k)| <= stop_tol;
/// the trajectory then ends at x(k).
inline Trajectory simulate_bc(const Stepper& step, const OpinionState& x0, BcOptions options = {}) {
    if (options.max_steps < 1) throw InvalidArgument("max_steps must be >= 1");
    Trajectory traj;
    traj.push(x0, 0.0);
    for (std::size_t k = 0; k < options.max_steps; ++k) {
        OpinionState next = step(traj.back());
        const bool fixed = options.stop_tol == 0.0 ? next == traj.back()
                                                   : max_abs_diff(next, traj.back()) <= options.stop_tol;
        if (fixed) {
            traj.terminated_at = k;
            return traj;
        }
        traj.push(std::move(next), static_cast<double>(k + 1));
    }
    if (options.require_termination) throw MaxStepsExceeded(options.max_steps, std::move(traj));
    return traj;
}

inline Stepper hk_stepper(ConfidenceSpec spec) {
    return [spec = std::move(spec)](const OpinionState& x) { return hk_step(x, spec); };
}

/// 2n^3 - 2(n-1)^2: the bound on HK termination time.
inline std::size_t hk_termination_bound(std::size_t n) {
    return 2 * n * n * n - 2 * (n - 1) * (n - 1);
}

using InfluenceFn = std::function<double(double)>;

/// dx_i/dt = sum_j s(x_j - x_i)(x_j - x_i) for scalar opinions. `s` must be even and
/// nonnegative; it is evaluated once per unordered pair, which keeps A(x) symmetric.
inline Trajectory smooth_hk_simulate(const OpinionState& x0, InfluenceFn s, double t_end, double dt,
                                     FlowOptions options = {}) {
    if (x0.m() != 1) throw InvalidArgument("smoothed HK is defined for scalar opinions");
    StateRule rule = [s = std::move(s)](double, const OpinionState& x) {
        Matrix a = Matrix::Zero(x.n(), x.n());
        for (std::size_t i = 0; i < x.n(); ++i)
            for (std::size_t j = i + 1; j < x.n(); ++j) {
                const double v = s(x[j] - x[i]);
                a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
                a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
            }
        return a;
    };
    return flow_simulate(WeightSpec::state_dependent(WeightKind::Nonnegative, std::move(rule)), x0, t_end, dt, false,
                         options);
}

/// Smooth even bump supported on (-d, d), equal to 1 at 0.
inline InfluenceFn bump_influence(double d) {
    return [d](double z) {
        const double u = z / d;
        return std::abs(u) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - u * u)) : 0.0;
    };
}

} // namespace opdyn
