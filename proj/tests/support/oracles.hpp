#pragma once

// Independent reference computations and random instance generators shared by
// the unit tests and the acceptance runner. Nothing here calls the code under
// test for the quantity being checked.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <set>
#include <vector>

#include "opdyn/opdyn.hpp"

namespace oracle {

using opdyn::Matrix;
using opdyn::OpinionState;
using opdyn::RngStream;
using opdyn::Vector;

/// x_i <= x_j implies y_i <= y_j for every pair.
inline bool order_preserved(const OpinionState& x, const OpinionState& y) {
    for (std::size_t i = 0; i < x.n(); ++i)
        for (std::size_t j = 0; j < x.n(); ++j)
            if (x[i] <= x[j] && !(y[i] <= y[j])) return false;
    return true;
}

/// Labels each agent with the index of its maximal d-chain, by direct pairwise
/// connectivity (flood fill over |x_i - x_j| <= d), not by sorting.
inline std::vector<int> chain_labels(const OpinionState& x, double d) {
    const std::size_t n = x.n();
    std::vector<int> label(n, -1);
    int next = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (label[s] >= 0) continue;
        std::vector<std::size_t> stack{s};
        label[s] = next;
        while (!stack.empty()) {
            const std::size_t a = stack.back();
            stack.pop_back();
            for (std::size_t b = 0; b < n; ++b)
                if (label[b] < 0 && std::abs(x[a] - x[b]) <= d) {
                    label[b] = next;
                    stack.push_back(b);
                }
        }
        ++next;
    }
    return label;
}

/// Agents in different chains at x are in different chains at y.
inline bool chains_not_merged(const OpinionState& x, const OpinionState& y, double d) {
    const auto lx = chain_labels(x, d), ly = chain_labels(y, d);
    for (std::size_t i = 0; i < x.n(); ++i)
        for (std::size_t j = 0; j < x.n(); ++j)
            if (lx[i] != lx[j] && ly[i] == ly[j]) return false;
    return true;
}

/// Over steps k, k+1 every maximal chain of x(k) collapses to a singleton, splits,
/// or loses at least d/n^2 of diameter by x(k+2).
inline bool chain_progress(const OpinionState& x0, const OpinionState& x1, const OpinionState& x2, double d) {
    const std::size_t n = x0.n();
    const auto l0 = chain_labels(x0, d), l1 = chain_labels(x1, d), l2 = chain_labels(x2, d);
    const double shrink = d / static_cast<double>(n * n);
    const int chains = *std::max_element(l0.begin(), l0.end()) + 1;
    for (int c = 0; c < chains; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i)
            if (l0[i] == c) members.push_back(i);
        auto diam = [&](const OpinionState& x) {
            double lo = INFINITY, hi = -INFINITY;
            for (auto i : members) lo = std::min(lo, x[i]), hi = std::max(hi, x[i]);
            return hi - lo;
        };
        auto split = [&](const std::vector<int>& l) {
            for (auto i : members)
                if (l[i] != l[members.front()]) return true;
            return false;
        };
        if (diam(x2) == 0.0) continue;
        if (split(l1) || split(l2)) continue;
        if (diam(x2) <= diam(x0) - shrink + 1e-12) continue;
        return false;
    }
    return true;
}

/// Direct-definition HK step with plain arithmetic means (for comparison up to rounding).
inline OpinionState hk_reference(const OpinionState& x, double d) {
    OpinionState y = x;
    for (std::size_t i = 0; i < x.n(); ++i) {
        double sum = 0.0;
        int count = 0;
        for (std::size_t j = 0; j < x.n(); ++j)
            if (std::abs(x[j] - x[i]) <= d) sum += x[j], ++count;
        y[i] = sum / count;
    }
    return y;
}

inline double energy_reference(const OpinionState& x, double d) {
    double e = 0.0;
    for (std::size_t i = 0; i < x.n(); ++i)
        for (std::size_t j = 0; j < x.n(); ++j) {
            const double s = (x.values().row(i) - x.values().row(j)).squaredNorm();
            e += s < d * d ? s : d * d;
        }
    return e;
}

inline double increment_sq(const OpinionState& x, const OpinionState& y) {
    return (y.values() - x.values()).squaredNorm();
}

// ---------------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------------

inline OpinionState uniform_scalar(RngStream& rng, std::size_t n, double lo = 0.0, double hi = 1.0) {
    std::vector<double> xs(n);
    for (auto& v : xs) v = rng.uniform(lo, hi);
    return OpinionState::scalar(xs);
}

/// Nonnegative matrix with zero diagonal whose graph contains the cycle 0 -> 1 -> ... -> 0
/// plus random extra arcs, hence strongly connected. Weights in [0.2, 1.2].
inline Matrix random_strong_positive(RngStream& rng, std::size_t n, double extra = 0.3) {
    Matrix a = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i) a((i + 1) % n, i) = rng.uniform(0.2, 1.2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && a(i, j) == 0.0 && rng.uniform01() < extra) a(i, j) = rng.uniform(0.2, 1.2);
    if (n == 1) a.setZero();
    return a;
}

inline std::vector<int> random_signs(RngStream& rng, std::size_t n) {
    std::vector<int> s(n);
    for (auto& v : s) v = rng.coin() ? 1 : -1;
    return s;
}

/// D A D with D = diag(signs).
inline Matrix gauge(const Matrix& a, const std::vector<int>& signs) {
    Matrix out = a;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out(i, j) *= signs[i] * signs[j];
    return out;
}

/// Strongly connected signed graph with at least one negative semicycle: flips the sign
/// of a single arc on the Hamiltonian cycle of a gauge-balanced graph, after making that
/// arc's reverse absent or consistent so the flip creates a negative cycle.
inline Matrix random_imbalanced_strong(RngStream& rng, std::size_t n) {
    Matrix a = random_strong_positive(rng, n);
    a = gauge(a, random_signs(rng, n));
    // The cycle 0 -> 1 -> ... -> n-1 -> 0 has positive product after gauging; flip one arc.
    const std::size_t i = rng.index(n);
    const std::size_t to = (i + 1) % n;
    a(to, i) = -a(to, i);
    if (a(i, to) != 0.0) a(i, to) = -a(i, to);
    return a;
}

/// Dense reference Laplacian straight from the definition.
inline Matrix laplacian_reference(const Matrix& a) {
    const auto n = a.rows();
    Matrix l = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k) {
            if (j == k) continue;
            l(j, k) = -a(j, k);
            l(j, j) += std::abs(a(j, k));
        }
    return l;
}

inline std::uint64_t hash_doubles(std::uint64_t h, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        std::uint64_t bits;
        const double v = m.data()[i];
        std::memcpy(&bits, &v, sizeof bits);
        h ^= bits + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

} // namespace oracle
