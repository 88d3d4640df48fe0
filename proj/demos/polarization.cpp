// Signed flow on a structurally balanced ring: two camps with opposite opinions.
#include <opdyn/opdyn.hpp>

#include <cstdio>

using namespace opdyn;

int main() {
    const std::size_t n = 6;
    Matrix a = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        const double s = (i < 3) == (j < 3) ? 1.0 : -1.0;
        a(i, j) = a(j, i) = s;
    }
    const SignedGraph g(a);
    const BalanceResult bal = structural_balance(g);
    std::printf("balanced: %s\n", bal.balanced ? "yes" : "no");

    const OpinionState x0 = OpinionState::scalar({0.9, -0.3, 0.4, 0.1, -0.8, 0.5});
    const auto pred = predict_bipartite_consensus(g, x0);
    const Trajectory t = flow_simulate(WeightSpec::constant(WeightKind::Signed, a), x0, 30.0, 0.01, true);
    for (std::size_t i = 0; i < n; ++i)
        std::printf("agent %zu  x(T) = % .6f  predicted % .6f\n", i, t.back()[i], (*pred.limit)[i]);
    std::printf("outcome: %s\n", to_string(classify(t, 1e-6).kind));
}
