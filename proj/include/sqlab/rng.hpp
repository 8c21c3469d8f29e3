#pragma once

#include <cstdint>
#include <random>

namespace sqlab {

// SplitMix64 step, used both as a seed scrambler and for stream splitting.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Stream-splitting rule: the stream for trial `index` under master seed `seed`
// is seeded with split_seed(seed, index). Streams for distinct indices are
// independent for all practical purposes and do not depend on thread order.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s = seed ^ (0xD1B54A32D192ED03ULL * (index + 1));
    std::uint64_t b = splitmix64(s);
    return a ^ b;
}

// mt19937_64 wrapper with a hand-rolled polar Gaussian so that sampled values
// are bit-identical across standard libraries (std::normal_distribution is
// implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    double uniform() {
        // 53-bit mantissa uniform in [0,1)
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, r2;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            r2 = u * u + v * v;
        } while (r2 >= 1.0 || r2 == 0.0);
        const double f = std::sqrt(-2.0 * std::log(r2) / r2);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    // Rademacher +/-1
    double sign() { return (engine_() & 1ULL) ? 1.0 : -1.0; }

    std::uint64_t integer() { return engine_(); }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        // rejection sampling to avoid modulo bias
        const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace sqlab
