// One uniform draw, several confidence radii: cluster counts next to round(1/(2d)).
#include <opdyn/opdyn.hpp>

#include <cstdio>
#include <cstdlib>

using namespace opdyn;

int main(int argc, char** argv) {
    const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 0;
    const std::size_t n = 100;
    RngStream rng(seed, 0);
    std::vector<double> xs(n);
    for (auto& v : xs) v = rng.uniform01();
    const OpinionState x0 = OpinionState::scalar(xs);

    std::printf("%6s %8s %6s %10s\n", "d", "clusters", "1/2d", "steps");
    for (double d : {0.05, 0.06, 0.11, 0.12, 0.2, 0.25}) {
        const Trajectory t = simulate_bc(hk_stepper(ConfidenceSpec::symmetric(d)), x0);
        std::printf("%6.2f %8zu %6ld %10zu\n", d, clusters(t.back(), d).count(), std::lround(1.0 / (2.0 * d)),
                    *t.terminated_at);
    }
}
