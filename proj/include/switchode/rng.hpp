#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace switchode {

// splitmix64 step; used both as a seed mixer and to derive child streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Deterministic child seed for a named stream of a master seed. Streams with
// distinct ids are statistically independent; the scheme is documented so that
// outputs are reproducible from the single user-facing seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (0xD1B54A32D192ED03ULL * (stream + 1));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

// Wrapper around mt19937_64 with distribution code that does not depend on
// standard-library internals, so identical seeds give identical streams on
// every platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(s) >> 32),
                          static_cast<std::uint32_t>(splitmix64(s)),
                          static_cast<std::uint32_t>(splitmix64(s) >> 32),
                          static_cast<std::uint32_t>(splitmix64(s))};
        engine_.seed(seq);
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log argument.
    double uniform_pos() { return 1.0 - uniform(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Marsaglia polar method; cached second variate.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t threshold = (~n + 1) % n;
        for (;;) {
            std::uint64_t r = engine_();
            if (r >= threshold) return r % n;
        }
    }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace switchode
