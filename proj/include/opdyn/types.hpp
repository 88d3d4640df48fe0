#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "opdyn/error.hpp"

namespace opdyn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Opinions of n agents, each a point in R^m. Row i holds agent i.
class OpinionState {
public:
    OpinionState() = default;

    explicit OpinionState(Matrix values) : values_(std::move(values)) { check(); }

    /// Scalar opinions (m = 1).
    static OpinionState scalar(std::span<const double> xs) {
        Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
        for (std::size_t i = 0; i < xs.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = xs[i];
        return OpinionState(std::move(m));
    }
    static OpinionState scalar(std::initializer_list<double> xs) {
        return scalar(std::span<const double>(xs.begin(), xs.size()));
    }
    static OpinionState scalar(const std::vector<double>& xs) {
        return scalar(std::span<const double>(xs));
    }

    /// Rows of `points` become agent opinions; every row must have the same length.
    static OpinionState points(const std::vector<std::vector<double>>& points) {
        if (points.empty()) throw InvalidArgument("opinion state needs at least one agent");
        const std::size_t m = points.front().size();
        Matrix out(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (points[i].size() != m) throw InvalidArgument("ragged opinion rows");
            for (std::size_t k = 0; k < m; ++k)
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = points[i][k];
        }
        return OpinionState(std::move(out));
    }

    std::size_t n() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    std::size_t m() const noexcept { return static_cast<std::size_t>(values_.cols()); }

    double operator()(std::size_t i, std::size_t k) const {
        return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }
    double& operator()(std::size_t i, std::size_t k) {
        return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }
    /// Scalar access for m = 1 states.
    double operator[](std::size_t i) const { return (*this)(i, 0); }
    double& operator[](std::size_t i) { return (*this)(i, 0); }

    const Matrix& values() const noexcept { return values_; }
    Matrix& values() noexcept { return values_; }

    std::vector<double> column(std::size_t k) const {
        std::vector<double> out(n());
        for (std::size_t i = 0; i < n(); ++i) out[i] = (*this)(i, k);
        return out;
    }

    /// Largest per-dimension spread max_i x_ik - min_i x_ik.
    double diameter() const {
        double diam = 0.0;
        for (Eigen::Index k = 0; k < values_.cols(); ++k)
            diam = std::max(diam, values_.col(k).maxCoeff() - values_.col(k).minCoeff());
        return diam;
    }

    double distance(std::size_t i, std::size_t j) const {
        return (values_.row(static_cast<Eigen::Index>(i)) - values_.row(static_cast<Eigen::Index>(j))).norm();
    }

    friend bool operator==(const OpinionState& a, const OpinionState& b) {
        return a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
               a.values_ == b.values_;
    }

private:
    void check() const {
        if (values_.rows() < 1 || values_.cols() < 1)
            throw InvalidArgument("opinion state needs n >= 1 agents and dimension m >= 1");
        if (!values_.allFinite()) throw InvalidArgument("opinion state has non-finite entries");
    }

    Matrix values_;
};

/// Largest absolute componentwise difference between two states of equal shape.
inline double max_abs_diff(const OpinionState& a, const OpinionState& b) {
    if (a.n() != b.n() || a.m() != b.m()) throw InvalidArgument("state shape mismatch");
    return (a.values() - b.values()).cwiseAbs().maxCoeff();
}

/// One sampled interaction of a randomized model (agent indices are 0-based).
struct InteractionEvent {
    std::size_t step = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    bool interacted = false;
};

/// Ordered record of a simulation run.
struct Trajectory {
    std::vector<OpinionState> states;
    std::vector<double> stamps;            ///< step index or continuous time, strictly increasing
    std::optional<std::size_t> terminated_at;
    std::vector<InteractionEvent> events;  ///< randomized models only
    std::vector<std::size_t> active_matrix; ///< schedule segment per step, when applicable

    void push(OpinionState x, double stamp) {
        if (!states.empty()) {
            if (x.n() != states.front().n() || x.m() != states.front().m())
                throw InvalidArgument("trajectory states must share (n, m)");
            if (!(stamp > stamps.back())) throw InvalidArgument("trajectory stamps must increase");
        }
        states.push_back(std::move(x));
        stamps.push_back(stamp);
    }

    bool empty() const noexcept { return states.empty(); }
    std::size_t size() const noexcept { return states.size(); }
    const OpinionState& front() const { return states.front(); }
    const OpinionState& back() const { return states.back(); }
};

} // namespace opdyn
