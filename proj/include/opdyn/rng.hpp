#pragma once

// Reproducible random streams.
//
// A stream is identified by (seed, stream). Both are mixed through SplitMix64 to
// produce the seed sequence of a std::mt19937_64 engine, so distinct trial
// indices give statistically independent engines. Conversions to doubles and
// bounded integers are done here rather than through <random> distributions,
// whose output is implementation-defined.

#include <cstdint>
#include <random>

#include "opdyn/error.hpp"

namespace opdyn {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct RngSeed {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

class RngStream {
public:
    explicit RngStream(RngSeed id) : id_(id) {
        std::uint64_t s = id.seed ^ (0xD1B54A32D192ED03ULL * (id.stream + 1));
        std::uint32_t words[8];
        for (int k = 0; k < 4; ++k) {
            const std::uint64_t w = splitmix64(s);
            words[2 * k] = static_cast<std::uint32_t>(w);
            words[2 * k + 1] = static_cast<std::uint32_t>(w >> 32);
        }
        std::seed_seq seq(std::begin(words), std::end(words));
        engine_.seed(seq);
    }
    RngStream(std::uint64_t seed, std::uint64_t stream) : RngStream(RngSeed{seed, stream}) {}

    const RngSeed& id() const noexcept { return id_; }

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform on {0, ..., n-1}, rejection sampling without modulo bias.
    std::size_t index(std::size_t n) {
        if (n == 0) throw InvalidArgument("cannot sample from an empty range");
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return static_cast<std::size_t>(r % bound);
    }

    bool coin() { return (engine_() >> 63) != 0; }

private:
    RngSeed id_;
    std::mt19937_64 engine_;
};

} // namespace opdyn
