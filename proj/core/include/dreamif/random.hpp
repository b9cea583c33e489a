#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace dreamif {

// Seeded RNG with explicit distribution code so a given seed yields the same
// draw sequence regardless of the standard library in use.
class RandomSource {
  public:
    explicit RandomSource(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() {
        return (engine_() >> 11) * (1.0 / 9007199254740992.0);  // 53-bit mantissa
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection keeps the draw unbiased.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller, one spare cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Poisson draw. Exact product method for small means; above the cutoff a
    // rounded Gaussian is statistically indistinguishable at our tolerances
    // and keeps large-intensity sampling O(1).
    std::int64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean <= 512.0) {
            const double limit = std::exp(-mean);
            std::int64_t k = 0;
            double p = 1.0;
            do {
                ++k;
                p *= uniform();
            } while (p > limit);
            return k - 1;
        }
        const double x = std::round(normal(mean, std::sqrt(mean)));
        return x < 0.0 ? 0 : static_cast<std::int64_t>(x);
    }

    // Derives an independent child seed (for per-sample streams).
    std::uint64_t fork_seed() { return engine_(); }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Stable 64-bit hash for name-keyed parameter seeding.
inline std::uint64_t fnv1a64(const std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace dreamif
