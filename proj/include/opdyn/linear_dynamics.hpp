#pragma once

// Averaging recursions x(k+1) = W(k) x(k) and Laplacian flows dx/dt = -L[A(t,x)] x.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "opdyn/error.hpp"
#include "opdyn/net_graph.hpp"
#include "opdyn/types.hpp"

namespace opdyn {

inline constexpr double kRowSumTol = 1e-9;

enum class WeightKind { Stochastic, Nonnegative, Signed };

inline const char* to_string(WeightKind k) {
    switch (k) {
    case WeightKind::Stochastic: return "stochastic";
    case WeightKind::Nonnegative: return "nonnegative";
    case WeightKind::Signed: return "signed";
    }
    return "?";
}

inline bool is_stochastic(const Matrix& w, double tol = kRowSumTol) {
    if (w.rows() != w.cols() || !w.allFinite()) return false;
    if ((w.array() < 0.0).any()) return false;
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        if (std::abs(w.row(i).sum() - 1.0) > tol) return false;
    return true;
}

/// Discrete Altafini weights: |W| row-stochastic and w_ii >= 0.
inline bool is_signed_stochastic(const Matrix& w, double tol = kRowSumTol) {
    if (w.rows() != w.cols() || !w.allFinite()) return false;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        if (w(i, i) < 0.0) return false;
        if (std::abs(w.row(i).cwiseAbs().sum() - 1.0) > tol) return false;
    }
    return true;
}

inline void require_square(const Matrix& w, std::size_t n, const char* what) {
    if (w.rows() != w.cols() || static_cast<std::size_t>(w.rows()) != n)
        throw InvalidArgument(std::string(what) + ": matrix is not " + std::to_string(n) + "x" +
                              std::to_string(n));
    if (!w.allFinite()) throw InvalidArgument(std::string(what) + ": matrix has non-finite entries");
}

/// Piecewise-constant matrix schedule. Segment s is active on [until_{s-1}, until_s),
/// with until_{-1} = 0. Past the last breakpoint the schedule either holds the last
/// matrix or, when periodic, repeats with period equal to the last breakpoint.
struct ScheduleSegment {
    double until = 0.0;
    Matrix matrix;
};

struct Schedule {
    std::vector<ScheduleSegment> segments;
    bool periodic = false;

    void validate() const {
        if (segments.empty()) throw InvalidArgument("schedule has no segments");
        double prev = 0.0;
        const auto n = segments.front().matrix.rows();
        for (const auto& seg : segments) {
            if (!(seg.until > prev)) throw InvalidArgument("schedule breakpoints must increase from 0");
            prev = seg.until;
            if (seg.matrix.rows() != n || seg.matrix.cols() != n)
                throw InvalidArgument("schedule matrices must share one square shape");
        }
    }

    double horizon() const { return segments.back().until; }

    /// Active segment at time t and the absolute time at which it ends.
    std::pair<std::size_t, double> locate(double t) const {
        double offset = 0.0;
        double local = t;
        if (periodic) {
            const double period = horizon();
            const double cycles = std::floor(t / period);
            offset = cycles * period;
            local = t - offset;
        }
        for (std::size_t s = 0; s < segments.size(); ++s)
            if (local < segments[s].until) return {s, offset + segments[s].until};
        if (periodic) return {0, offset + period_end(0)};
        return {segments.size() - 1, std::numeric_limits<double>::infinity()};
    }

private:
    double period_end(std::size_t s) const { return horizon() + segments[s].until; }
};

using StateRule = std::function<Matrix(double t, const OpinionState& x)>;

/// Coupling matrices of a model: one constant matrix, a piecewise-constant schedule
/// or a state-dependent rule.
class WeightSpec {
public:
    using Provider = std::variant<Matrix, Schedule, StateRule>;

    static WeightSpec constant(WeightKind kind, Matrix w) { return WeightSpec(kind, std::move(w)); }
    static WeightSpec scheduled(WeightKind kind, Schedule s) { return WeightSpec(kind, std::move(s)); }
    static WeightSpec state_dependent(WeightKind kind, StateRule rule) {
        return WeightSpec(kind, std::move(rule));
    }

    WeightKind kind() const noexcept { return kind_; }
    const Provider& provider() const noexcept { return provider_; }
    bool is_state_dependent() const { return std::holds_alternative<StateRule>(provider_); }

    /// Agent count, when it does not depend on a state.
    std::optional<std::size_t> n() const {
        if (auto m = std::get_if<Matrix>(&provider_)) return static_cast<std::size_t>(m->rows());
        if (auto s = std::get_if<Schedule>(&provider_))
            return static_cast<std::size_t>(s->segments.front().matrix.rows());
        return std::nullopt;
    }

    /// Matrix in force at time (or step) t; `x` is consulted only by state rules.
    Matrix at(double t, const OpinionState* x = nullptr) const {
        if (auto m = std::get_if<Matrix>(&provider_)) return *m;
        if (auto s = std::get_if<Schedule>(&provider_)) return s->segments[s->locate(t).first].matrix;
        if (!x) throw InvalidArgument("state-dependent weights need the current state");
        Matrix w = std::get<StateRule>(provider_)(t, *x);
        check(w);
        return w;
    }

    std::size_t segment_at(double t) const {
        if (auto s = std::get_if<Schedule>(&provider_)) return s->locate(t).first;
        return 0;
    }

    /// Every matrix stored in the spec (empty for state rules).
    std::vector<Matrix> stored_matrices() const {
        if (auto m = std::get_if<Matrix>(&provider_)) return {*m};
        std::vector<Matrix> out;
        if (auto s = std::get_if<Schedule>(&provider_))
            for (const auto& seg : s->segments) out.push_back(seg.matrix);
        return out;
    }

    /// The matrices used at steps 0, ..., steps-1 of a discrete recursion.
    std::vector<Matrix> expand(std::size_t steps) const {
        if (is_state_dependent()) throw InvalidArgument("cannot expand a state-dependent spec");
        std::vector<Matrix> out;
        out.reserve(steps);
        for (std::size_t k = 0; k < steps; ++k) out.push_back(at(static_cast<double>(k)));
        return out;
    }

private:
    WeightSpec(WeightKind kind, Provider p) : kind_(kind), provider_(std::move(p)) {
        if (auto s = std::get_if<Schedule>(&provider_)) s->validate();
        for (const Matrix& w : stored_matrices()) check(w);
    }

    void check(const Matrix& w) const {
        if (w.rows() < 1 || w.rows() != w.cols()) throw InvalidArgument("weight matrix must be square");
        if (!w.allFinite()) throw InvalidArgument("weight matrix has non-finite entries");
        switch (kind_) {
        case WeightKind::Stochastic:
            if (!is_stochastic(w)) throw InvalidArgument("matrix is not row-stochastic");
            break;
        case WeightKind::Nonnegative:
            if ((w.array() < 0.0).any()) throw InvalidArgument("matrix has negative entries");
            break;
        case WeightKind::Signed:
            // |W| stochasticity is a property of the discrete model only; checked at use.
            break;
        }
    }

    WeightKind kind_;
    Provider provider_;
};

// ---------------------------------------------------------------------------
// Discrete time
// ---------------------------------------------------------------------------

inline OpinionState degroot_step(const Matrix& w, const OpinionState& x) {
    require_square(w, x.n(), "degroot_step");
    if (!is_stochastic(w)) throw InvalidArgument("degroot_step: matrix is not row-stochastic");
    return OpinionState(w * x.values());
}

inline OpinionState signed_step(const Matrix& w, const OpinionState& x) {
    require_square(w, x.n(), "signed_step");
    if (!is_signed_stochastic(w))
        throw InvalidArgument("signed_step: |W| must be row-stochastic with nonnegative diagonal");
    return OpinionState(w * x.values());
}

inline Trajectory simulate_discrete(const WeightSpec& spec, const OpinionState& x0, std::size_t steps) {
    if (spec.kind() == WeightKind::Nonnegative)
        throw InvalidArgument("simulate_discrete needs a stochastic or signed spec");
    Trajectory traj;
    traj.push(x0, 0.0);
    OpinionState x = x0;
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k);
        const Matrix w = spec.at(t, &x);
        x = spec.kind() == WeightKind::Stochastic ? degroot_step(w, x) : signed_step(w, x);
        traj.active_matrix.push_back(spec.segment_at(t));
        traj.push(x, static_cast<double>(k + 1));
    }
    return traj;
}

/// Backward product W(k)...W(0) iterated until successive products differ by < tol (max norm).
inline Matrix matrix_product_limit(const WeightSpec& spec, double tol, std::size_t max_iter) {
    if (spec.kind() != WeightKind::Stochastic)
        throw InvalidArgument("matrix_product_limit needs a stochastic spec");
    if (spec.is_state_dependent()) throw InvalidArgument("matrix_product_limit needs state-free weights");
    Matrix product = spec.at(0.0);
    for (std::size_t k = 1; k <= max_iter; ++k) {
        Matrix next = spec.at(static_cast<double>(k)) * product;
        const double change = (next - product).cwiseAbs().maxCoeff();
        product = std::move(next);
        if (change < tol) return product;
    }
    throw NonConvergent("matrix product did not settle", max_iter);
}

struct Lemma1Violation {
    std::size_t step = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    char condition = 'a';  ///< 'a' entry range, 'b' self-weight, 'c' reciprocity
    double value = 0.0;
};

struct Lemma1Report {
    bool pass = true;
    std::optional<Lemma1Violation> violation;
};

/// Checks, per step: (a) w_ij in {0} u [delta, 1]; (b) w_ii >= delta; (c) w_ij > 0 <=> w_ji > 0.
inline Lemma1Report verify_lemma1_premises(std::span<const Matrix> w_seq, double delta) {
    if (!(delta > 0.0 && delta <= 1.0)) throw InvalidArgument("delta must lie in (0, 1]");
    auto fail = [](std::size_t k, Eigen::Index i, Eigen::Index j, char c, double v) {
        return Lemma1Report{false, Lemma1Violation{k, static_cast<std::size_t>(i), static_cast<std::size_t>(j), c, v}};
    };
    for (std::size_t k = 0; k < w_seq.size(); ++k) {
        const Matrix& w = w_seq[k];
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                const double v = w(i, j);
                if (v != 0.0 && (v < delta || v > 1.0)) return fail(k, i, j, 'a', v);
            }
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            if (w(i, i) < delta) return fail(k, i, i, 'b', w(i, i));
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j)
                if ((w(i, j) > 0.0) != (w(j, i) > 0.0)) return fail(k, i, j, 'c', w(i, j));
    }
    return {};
}

// ---------------------------------------------------------------------------
// Uniform quasi-strong connectivity and type symmetry
// ---------------------------------------------------------------------------

/// Integral of a piecewise-constant schedule over [t0, t1].
inline Matrix integrate_schedule(const Schedule& s, double t0, double t1) {
    const auto n = s.segments.front().matrix.rows();
    Matrix total = Matrix::Zero(n, n);
    double t = t0;
    while (t < t1) {
        const auto [seg, end] = s.locate(t);
        const double stop = std::min(end, t1);
        total += (stop - t) * s.segments[seg].matrix;
        if (!(stop > t)) break;
        t = stop;
    }
    return total;
}

struct UqscReport {
    bool pass = true;
    bool bounded = true;                       ///< 0 <= a_ij <= M everywhere
    std::optional<double> failing_window;      ///< start of a window without spanning tree
    std::vector<double> windows_checked;
};

/// Window starts: 0, every breakpoint, breakpoint - T, and a grid of spacing T/4 up to
/// one period (or the last breakpoint) past which the pattern repeats or freezes.
inline UqscReport verify_uqsc(const WeightSpec& spec, double window_T, double eps, double bound_M) {
    if (!(window_T > 0.0)) throw InvalidArgument("window length must be positive");
    if (spec.is_state_dependent()) throw InvalidArgument("UQSC check needs state-free weights");
    UqscReport report;
    for (const Matrix& a : spec.stored_matrices())
        if ((a.array() < 0.0).any() || (a.array() > bound_M).any()) report.bounded = false;

    auto window_ok = [&](const Matrix& integral) {
        Matrix thresholded = (integral.array() > eps).cast<double>().matrix();
        return connectivity(SignedGraph(thresholded)).has_spanning_tree;
    };

    if (const auto* a = std::get_if<Matrix>(&spec.provider())) {
        report.windows_checked.push_back(0.0);
        if (!window_ok(window_T * *a)) report.failing_window = 0.0;
    } else {
        const Schedule& s = std::get<Schedule>(spec.provider());
        const double horizon = s.horizon();
        std::vector<double> starts{0.0, horizon};
        for (const auto& seg : s.segments) {
            starts.push_back(seg.until);
            if (seg.until - window_T > 0.0) starts.push_back(seg.until - window_T);
        }
        for (double t = 0.0; t <= horizon; t += window_T / 4.0) starts.push_back(t);
        std::sort(starts.begin(), starts.end());
        starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
        for (double t : starts) {
            report.windows_checked.push_back(t);
            if (!window_ok(integrate_schedule(s, t, t + window_T))) {
                report.failing_window = t;
                break;
            }
        }
    }
    report.pass = report.bounded && !report.failing_window;
    return report;
}

struct TypeSymmetryReport {
    bool pass = true;
    std::optional<std::size_t> segment;
    std::optional<std::pair<std::size_t, std::size_t>> pair;
};

/// K^{-1}|a_ji| <= |a_ij| <= K|a_ji| on every stored matrix.
inline TypeSymmetryReport check_type_symmetry(const WeightSpec& spec, double K) {
    if (!(K >= 1.0)) throw InvalidArgument("type-symmetry constant K must be >= 1");
    const auto mats = spec.stored_matrices();
    for (std::size_t s = 0; s < mats.size(); ++s) {
        const Matrix& a = mats[s];
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < a.cols(); ++j) {
                const double aij = std::abs(a(i, j)), aji = std::abs(a(j, i));
                if (aji / K > aij || aij > K * aji)
                    return {false, s, std::make_pair(static_cast<std::size_t>(i), static_cast<std::size_t>(j))};
            }
    }
    return {};
}

/// Max pairwise distance below 1e-8 (1 + initial diameter).
inline bool consensus_reached(const OpinionState& x, double initial_diameter) {
    return x.diameter() < 1e-8 * (1.0 + initial_diameter);
}

// ---------------------------------------------------------------------------
// Friedkin-Johnsen
// ---------------------------------------------------------------------------

struct FJSpec {
    Vector lambda;   ///< susceptibilities, diagonal of Lambda
    Matrix w;        ///< stochastic influence matrix
    OpinionState u;  ///< prejudices, u = x(0)

    std::size_t n() const { return static_cast<std::size_t>(w.rows()); }

    void validate() const {
        require_square(w, u.n(), "FJ");
        if (static_cast<std::size_t>(lambda.size()) != u.n())
            throw InvalidArgument("FJ: susceptibility vector has wrong length");
        if ((lambda.array() < 0.0).any() || (lambda.array() > 1.0).any())
            throw InvalidArgument("FJ: susceptibilities must lie in [0, 1]");
        if (!is_stochastic(w)) throw InvalidArgument("FJ: W is not row-stochastic");
    }

    Matrix lambda_w() const { return lambda.asDiagonal() * w; }
};

/// Estimate of rho(M) from power iteration on |M| started at the all-ones vector.
/// Returns the larger of the Rayleigh quotient and the norm ratio of the last iterate.
inline double spectral_radius_estimate(const Matrix& m, int iterations = 200) {
    const Matrix a = m.cwiseAbs();
    Vector v = Vector::Ones(a.rows()) / std::sqrt(static_cast<double>(a.rows()));
    for (int it = 0; it < iterations; ++it) {
        Vector next = a * v;
        const double norm = next.norm();
        if (norm == 0.0) return 0.0;
        v = next / norm;
    }
    const Vector av = a * v;
    const double rayleigh = v.dot(av) / v.dot(v);
    return std::max(rayleigh, av.norm() / v.norm());
}

inline OpinionState fj_step(const FJSpec& spec, const OpinionState& x) {
    const Matrix lw = spec.lambda_w();
    const Vector one_minus = Vector::Ones(spec.lambda.size()) - spec.lambda;
    return OpinionState(lw * x.values() + one_minus.asDiagonal() * spec.u.values());
}

/// Solves (I - Lambda W) x = (I - Lambda) u.
inline OpinionState fj_fixed_point(const FJSpec& spec) {
    spec.validate();
    const Matrix lw = spec.lambda_w();
    const double rho = spectral_radius_estimate(lw);
    if (rho >= 1.0 - 1e-8) throw Unstable("FJ iteration matrix is not Schur stable", rho);
    const auto n = lw.rows();
    const Matrix lhs = Matrix::Identity(n, n) - lw;
    const Vector one_minus = Vector::Ones(n) - spec.lambda;
    const Matrix rhs = one_minus.asDiagonal() * spec.u.values();
    return OpinionState(lhs.partialPivLu().solve(rhs));
}

// ---------------------------------------------------------------------------
// Continuous time
// ---------------------------------------------------------------------------

inline double default_flow_dt(const Matrix& a) {
    return 0.01 / (1.0 + a.cwiseAbs().rowwise().sum().maxCoeff());
}

namespace detail {

/// -L[A] x column by column: sum over j != i of (a_ij x_j - |a_ij| x_i).
inline Matrix laplacian_rhs(const Matrix& a, const Matrix& x) {
    const Eigen::Index n = x.rows();
    Matrix out(n, x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c)
        for (Eigen::Index i = 0; i < n; ++i) {
            double acc = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                const double aij = a(i, j);
                acc += aij * x(j, c) - std::abs(aij) * x(i, c);
            }
            out(i, c) = acc;
        }
    return out;
}

} // namespace detail

struct FlowOptions {
    std::size_t record_every = 1;  ///< keep every k-th state; initial and final always kept
};

/// Classical RK4 on dx/dt = -L[A(t, x)] x with N = ceil(t_end / dt) equal steps.
inline Trajectory flow_simulate(const WeightSpec& spec, const OpinionState& x0, double t_end, double dt,
                                bool signed_weights, FlowOptions options = {}) {
    if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
    if (!(t_end >= 0.0)) throw InvalidArgument("t_end must be nonnegative");
    if (auto n = spec.n(); n && *n != x0.n()) throw InvalidArgument("flow: spec size does not match state");
    if (!signed_weights && spec.kind() == WeightKind::Signed)
        throw InvalidArgument("flow: signed spec requires signed integration");

    auto rhs = [&](double t, const Matrix& x) {
        const OpinionState state(x);
        const Matrix a = spec.at(t, &state);
        if (a.rows() != x.rows()) throw InvalidArgument("flow: weight matrix size does not match state");
        if (!signed_weights && (a.array() < 0.0).any())
            throw InvalidArgument("flow: negative coupling in an unsigned flow");
        return detail::laplacian_rhs(a, x);
    };

    const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-12));
    const double h = steps == 0 ? 0.0 : t_end / static_cast<double>(steps);
    const std::size_t every = std::max<std::size_t>(1, options.record_every);

    Trajectory traj;
    traj.push(x0, 0.0);
    Matrix x = x0.values();
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * h;
        const Matrix k1 = rhs(t, x);
        const Matrix k2 = rhs(t + 0.5 * h, x + (0.5 * h) * k1);
        const Matrix k3 = rhs(t + 0.5 * h, x + (0.5 * h) * k2);
        const Matrix k4 = rhs(t + h, x + h * k3);
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite())
            throw NumericalBreakdown("flow diverged to non-finite values at t = " + std::to_string(t + h));
        if ((k + 1) % every == 0 || k + 1 == steps) traj.push(OpinionState(x), static_cast<double>(k + 1) * h);
    }
    return traj;
}

/// Normalized nonnegative left null vector p of a Laplacian (p^T L = 0, sum p = 1).
/// Power iteration on (I - L/(1 + max diag))^T; a dense solve finishes the job if the
/// iteration has not reached residual 1e-12 after 10 000 sweeps.
inline Vector laplacian_left_null_vector(const Matrix& lap) {
    const Eigen::Index n = lap.rows();
    const double scale = 1.0 + lap.diagonal().maxCoeff();
    const Matrix step_t = (Matrix::Identity(n, n) - lap / scale).transpose();
    Vector p = Vector::Constant(n, 1.0 / static_cast<double>(n));
    auto residual = [&](const Vector& v) { return (lap.transpose() * v).cwiseAbs().maxCoeff(); };
    for (int it = 0; it < 10000 && residual(p) >= 1e-12; ++it) {
        p = step_t * p;
        p /= p.sum();
    }
    if (residual(p) >= 1e-12) {
        Matrix sys(n + 1, n);
        sys.topRows(n) = lap.transpose();
        sys.row(n).setOnes();
        Vector rhs = Vector::Zero(n + 1);
        rhs(n) = 1.0;
        Vector solved = sys.colPivHouseholderQr().solve(rhs);
        if (residual(solved) < residual(p)) p = solved;
    }
    return p;
}

struct BipartitePrediction {
    enum class Kind { Polarized, StableAtZero, Unsupported };
    Kind kind = Kind::Unsupported;
    std::optional<OpinionState> limit;     ///< predicted terminal state
    std::vector<std::size_t> camp1, camp2;
    Vector social_power;                   ///< p, Polarized only
    std::string reason;
};

inline BipartitePrediction predict_bipartite_consensus(const SignedGraph& g, const OpinionState& x0) {
    if (x0.n() != g.n()) throw InvalidArgument("prediction: state size does not match graph");
    BipartitePrediction out;
    const BalanceResult balance = structural_balance(g);
    const ConnectivityReport conn = connectivity(g);
    if (balance.balanced && conn.has_spanning_tree) {
        const GaugeVector delta = GaugeVector::from_balance(balance);
        const Vector p = laplacian_left_null_vector(signed_laplacian(g.absolute()));
        Vector w = p;
        for (Eigen::Index i = 0; i < w.size(); ++i) w(i) *= delta.signs[static_cast<std::size_t>(i)];
        Matrix limit(x0.n(), x0.m());
        for (std::size_t c = 0; c < x0.m(); ++c) {
            const double v = w.dot(x0.values().col(static_cast<Eigen::Index>(c)));
            for (std::size_t i = 0; i < x0.n(); ++i)
                limit(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = delta.signs[i] * v;
        }
        out.kind = BipartitePrediction::Kind::Polarized;
        out.limit = OpinionState(std::move(limit));
        out.camp1 = balance.camp1;
        out.camp2 = balance.camp2;
        out.social_power = p;
        return out;
    }
    if (!balance.balanced && conn.strongly_connected) {
        out.kind = BipartitePrediction::Kind::StableAtZero;
        out.limit = OpinionState(Matrix::Zero(x0.n(), x0.m()));
        return out;
    }
    out.reason = balance.balanced ? "balanced graph without a directed spanning tree"
                                  : "imbalanced graph that is not strongly connected";
    return out;
}

} // namespace opdyn
