#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace mobaudit {

// splitmix64; used to derive independent child seeds from a master seed.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic seed derivation: child = derive(master, label, index).
// Every parallel task gets its own stream so results are schedule-independent.
uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t index = 0);

// Self-contained RNG with explicit distribution algorithms. The standard
// <random> distributions are implementation-defined, which would break the
// byte-identical-artifacts contract across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x853c49e6748fea9bULL) {
        // warm up so nearby seeds decorrelate
        for (int i = 0; i < 4; ++i) next();
    }

    uint64_t next() { return splitmix64(state_); }

    // uniform in [0, 1)
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // uniform integer in [0, n)
    uint64_t uniform_index(uint64_t n) {
        // rejection sampling to avoid modulo bias
        if (n == 0) return 0;
        uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }

    // Box-Muller, no cached spare (keeps the stream position predictable)
    double normal(double mean = 0.0, double sigma = 1.0) {
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * r * std::cos(2.0 * M_PI * u2);
    }

    // Knuth's product method; lambda stays small (daily ping rates) in this codebase.
    uint64_t poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        uint64_t k = 0;
        double limit = std::exp(-lambda);
        double p = 1.0;
        // split large lambda into chunks to dodge underflow of exp(-lambda)
        double remaining = lambda;
        while (remaining > 500.0) {
            p = 1.0;
            double chunk_limit = std::exp(-500.0);
            do {
                ++k;
                p *= uniform01();
            } while (p > chunk_limit);
            --k;
            remaining -= 500.0;
        }
        limit = std::exp(-remaining);
        p = 1.0;
        do {
            ++k;
            p *= uniform01();
        } while (p > limit);
        return k - 1;
    }

    // Sample an index from an unnormalized cumulative weight table.
    size_t sample_cdf(const std::vector<double>& cdf);

private:
    uint64_t state_;
};

} // namespace mobaudit
