#pragma once

// Signed weighted digraphs. Entry a_ij of the weight matrix is the influence of
// agent j on agent i, so a nonzero a_ij is the arc j -> i.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "opdyn/error.hpp"
#include "opdyn/types.hpp"

namespace opdyn {

class SignedGraph {
public:
    explicit SignedGraph(Matrix weights, double zero_tol = 0.0)
        : weights_(std::move(weights)), zero_tol_(zero_tol) {
        if (weights_.rows() < 1 || weights_.rows() != weights_.cols())
            throw InvalidArgument("signed graph needs a nonempty square weight matrix");
        if (!weights_.allFinite()) throw InvalidArgument("signed graph weights must be finite");
        if (!(zero_tol_ >= 0.0)) throw InvalidArgument("zero_tol must be nonnegative");
    }

    std::size_t n() const noexcept { return static_cast<std::size_t>(weights_.rows()); }
    double zero_tol() const noexcept { return zero_tol_; }
    const Matrix& weights() const noexcept { return weights_; }

    /// a_ij with sub-tolerance magnitudes read as 0.
    double entry(std::size_t i, std::size_t j) const {
        const double a = weights_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        return std::abs(a) > zero_tol_ ? a : 0.0;
    }

    /// Arc from -> to, i.e. a_{to,from} != 0.
    bool has_arc(std::size_t from, std::size_t to) const { return entry(to, from) != 0.0; }

    /// Entrywise absolute value A^{|.|}.
    SignedGraph absolute() const { return SignedGraph(weights_.cwiseAbs(), zero_tol_); }

private:
    Matrix weights_;
    double zero_tol_;
};

/// L[A]: l_jk = -a_jk off the diagonal, l_jj = sum of |a_jm| over m != j.
/// Self-loops carry no information in a Laplacian flow and are dropped.
inline Matrix signed_laplacian(const SignedGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.n());
    Matrix lap = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double diag = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (k == j) continue;
            const double a = g.entry(static_cast<std::size_t>(j), static_cast<std::size_t>(k));
            lap(j, k) = -a;
            diag += std::abs(a);
        }
        lap(j, j) = diag;
    }
    return lap;
}

inline bool is_sign_symmetric(const SignedGraph& g) {
    for (std::size_t i = 0; i < g.n(); ++i)
        for (std::size_t j = i + 1; j < g.n(); ++j)
            if (g.entry(i, j) * g.entry(j, i) < 0.0) return false;
    return true;
}

struct BalanceResult {
    bool balanced = false;
    std::vector<std::size_t> camp1;  ///< V1, ascending
    std::vector<std::size_t> camp2;  ///< V2, ascending; may be empty
    /// Closed semiwalk v0, v1, ..., v0 with negative weight product (imbalanced only).
    std::vector<std::size_t> witness;
    /// Set when imbalance was detected as a_ij * a_ji < 0.
    std::optional<std::pair<std::size_t, std::size_t>> sign_asymmetric_pair;
};

namespace detail {

/// Weight of the undirected mirror edge {i, j}: whichever of a_ij, a_ji is nonzero.
inline double mirror_weight(const SignedGraph& g, std::size_t i, std::size_t j) {
    const double a = g.entry(i, j);
    return a != 0.0 ? a : g.entry(j, i);
}

} // namespace detail

/// Two-colours the undirected mirror graph; agents are visited in ascending index order.
inline BalanceResult structural_balance(const SignedGraph& g) {
    const std::size_t n = g.n();
    BalanceResult result;

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (g.entry(i, j) * g.entry(j, i) < 0.0) {
                result.sign_asymmetric_pair = std::make_pair(i, j);
                result.witness = {i, j, i};
                return result;
            }

    constexpr int unseen = -1;
    std::vector<int> color(n, unseen);
    std::vector<std::size_t> parent(n, 0);
    std::vector<std::size_t> depth(n, 0);

    for (std::size_t root = 0; root < n; ++root) {
        if (color[root] != unseen) continue;
        color[root] = 0;
        parent[root] = root;
        std::queue<std::size_t> frontier;
        frontier.push(root);
        while (!frontier.empty()) {
            const std::size_t u = frontier.front();
            frontier.pop();
            for (std::size_t v = 0; v < n; ++v) {
                if (v == u) continue;
                const double w = detail::mirror_weight(g, u, v);
                if (w == 0.0) continue;
                const int want = w > 0.0 ? color[u] : 1 - color[u];
                if (color[v] == unseen) {
                    color[v] = want;
                    parent[v] = u;
                    depth[v] = depth[u] + 1;
                    frontier.push(v);
                } else if (color[v] != want) {
                    // Tree paths u -> lca <- v closed by the offending edge.
                    std::vector<std::size_t> up_u{u}, up_v{v};
                    std::size_t a = u, b = v;
                    while (depth[a] > depth[b]) up_u.push_back(a = parent[a]);
                    while (depth[b] > depth[a]) up_v.push_back(b = parent[b]);
                    while (a != b) {
                        up_u.push_back(a = parent[a]);
                        up_v.push_back(b = parent[b]);
                    }
                    up_v.pop_back();  // lca already ends up_u
                    result.witness = up_u;
                    result.witness.insert(result.witness.end(), up_v.rbegin(), up_v.rend());
                    result.witness.push_back(u);
                    return result;
                }
            }
        }
    }

    result.balanced = true;
    for (std::size_t i = 0; i < n; ++i) (color[i] == 0 ? result.camp1 : result.camp2).push_back(i);
    return result;
}

/// Sign product along a semiwalk, using mirror weights between consecutive nodes.
inline double semiwalk_sign(const SignedGraph& g, std::span<const std::size_t> walk) {
    double sign = 1.0;
    for (std::size_t k = 0; k + 1 < walk.size(); ++k) {
        const double w = detail::mirror_weight(g, walk[k], walk[k + 1]);
        if (w == 0.0) return 0.0;
        if (w < 0.0) sign = -sign;
    }
    return sign;
}

struct GaugeVector {
    std::vector<int> signs;  ///< delta_i in {+1, -1}

    static GaugeVector identity(std::size_t n) { return GaugeVector{std::vector<int>(n, 1)}; }

    /// +1 on V1, -1 on V2.
    static GaugeVector from_balance(const BalanceResult& balance) {
        if (!balance.balanced) throw InvalidArgument("gauge requires a structurally balanced partition");
        GaugeVector delta{std::vector<int>(balance.camp1.size() + balance.camp2.size(), 1)};
        for (std::size_t i : balance.camp2) delta.signs[i] = -1;
        return delta;
    }

    std::size_t size() const noexcept { return signs.size(); }

    Matrix diagonal() const {
        Matrix d = Matrix::Zero(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(size()));
        for (std::size_t i = 0; i < size(); ++i)
            d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = signs[i];
        return d;
    }

    /// delta_i * x_i row by row.
    OpinionState apply(const OpinionState& x) const {
        if (x.n() != size()) throw InvalidArgument("gauge length does not match state");
        OpinionState y = x;
        for (std::size_t i = 0; i < size(); ++i)
            if (signs[i] < 0) y.values().row(static_cast<Eigen::Index>(i)) *= -1.0;
        return y;
    }
};

/// Entries delta_i delta_j a_ij.
inline SignedGraph gauge_apply(const SignedGraph& g, const GaugeVector& delta) {
    if (delta.size() != g.n()) throw InvalidArgument("gauge length does not match graph size");
    for (int s : delta.signs)
        if (s != 1 && s != -1) throw InvalidArgument("gauge entries must be +1 or -1");
    Matrix w = g.weights();
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            if (delta.signs[static_cast<std::size_t>(i)] != delta.signs[static_cast<std::size_t>(j)])
                w(i, j) = -w(i, j);
    return SignedGraph(std::move(w), g.zero_tol());
}

struct ConnectivityReport {
    bool strongly_connected = false;
    bool has_spanning_tree = false;  ///< some root reaches every node along arcs
    std::vector<std::vector<std::size_t>> components;  ///< strongly connected, sorted by first member
};

namespace detail {

/// Tarjan's algorithm, iterative. Returns component id per node.
inline std::vector<std::size_t> strong_components(const std::vector<std::vector<std::size_t>>& out,
                                                  std::size_t& count) {
    const std::size_t n = out.size();
    constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::vector<std::size_t> index(n, none), low(n, 0), comp(n, none);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::vector<std::pair<std::size_t, std::size_t>> call;  // (node, next edge)
    std::size_t counter = 0;
    count = 0;

    for (std::size_t s = 0; s < n; ++s) {
        if (index[s] != none) continue;
        call.emplace_back(s, 0);
        index[s] = low[s] = counter++;
        stack.push_back(s);
        on_stack[s] = true;
        while (!call.empty()) {
            auto& [v, e] = call.back();
            if (e < out[v].size()) {
                const std::size_t w = out[v][e++];
                if (index[w] == none) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    call.emplace_back(w, 0);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            if (low[v] == index[v]) {
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp[w] = count;
                } while (w != v);
                ++count;
            }
            const std::size_t done = v;
            call.pop_back();
            if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
        }
    }
    return comp;
}

} // namespace detail

inline ConnectivityReport connectivity(const SignedGraph& g) {
    const std::size_t n = g.n();
    std::vector<std::vector<std::size_t>> out(n);
    for (std::size_t from = 0; from < n; ++from)
        for (std::size_t to = 0; to < n; ++to)
            if (from != to && g.has_arc(from, to)) out[from].push_back(to);

    std::size_t count = 0;
    const auto comp = detail::strong_components(out, count);

    ConnectivityReport report;
    std::vector<bool> has_incoming(count, false);
    for (std::size_t from = 0; from < n; ++from)
        for (std::size_t to : out[from])
            if (comp[from] != comp[to]) has_incoming[comp[to]] = true;
    const auto sources = std::count(has_incoming.begin(), has_incoming.end(), false);

    std::vector<std::vector<std::size_t>> groups(count);
    for (std::size_t i = 0; i < n; ++i) groups[comp[i]].push_back(i);
    std::sort(groups.begin(), groups.end());
    report.components = std::move(groups);
    report.strongly_connected = count == 1;
    report.has_spanning_tree = sources == 1;
    return report;
}

/// Undirected simple graph stored as a symmetric adjacency table.
struct UndirectedGraph {
    std::size_t n = 0;
    std::vector<std::vector<bool>> adjacent;

    bool has_edge(std::size_t i, std::size_t j) const { return adjacent[i][j]; }

    /// Connected components, each ascending, ordered by first member.
    std::vector<std::vector<std::size_t>> components() const {
        std::vector<int> seen(n, 0);
        std::vector<std::vector<std::size_t>> out;
        for (std::size_t s = 0; s < n; ++s) {
            if (seen[s]) continue;
            std::vector<std::size_t> group;
            std::vector<std::size_t> todo{s};
            seen[s] = 1;
            while (!todo.empty()) {
                const std::size_t u = todo.back();
                todo.pop_back();
                group.push_back(u);
                for (std::size_t v = 0; v < n; ++v)
                    if (adjacent[u][v] && !seen[v]) {
                        seen[v] = 1;
                        todo.push_back(v);
                    }
            }
            std::sort(group.begin(), group.end());
            out.push_back(std::move(group));
        }
        return out;
    }

    bool connected() const { return components().size() == 1; }
};

/// Pairs whose cumulative coupling over the sequence reaches `threshold` in either direction.
inline UndirectedGraph persistent_graph(std::span<const Matrix> w_seq, double threshold) {
    if (w_seq.empty()) throw InvalidArgument("persistent graph needs a nonempty matrix sequence");
    if (!(threshold > 0.0)) throw InvalidArgument("persistence threshold must be positive");
    const Eigen::Index n = w_seq.front().rows();
    Matrix total = Matrix::Zero(n, n);
    for (const Matrix& w : w_seq) {
        if (w.rows() != n || w.cols() != n) throw InvalidArgument("matrix sequence has mixed sizes");
        total += w;
    }
    UndirectedGraph g{static_cast<std::size_t>(n),
                      std::vector<std::vector<bool>>(static_cast<std::size_t>(n),
                                                     std::vector<bool>(static_cast<std::size_t>(n), false))};
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j && (total(i, j) >= threshold || total(j, i) >= threshold))
                g.adjacent[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = true;
    return g;
}

} // namespace opdyn
