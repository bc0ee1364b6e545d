#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace nowcast {

// Deterministic 64-bit generator (splitmix64). Used everywhere randomness is
// needed so results are reproducible across compilers and standard libraries;
// std::shuffle / std::uniform_int_distribution are implementation-defined.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Unbiased integer in [0, n). n must be > 0.
    uint64_t next_below(uint64_t n) {
        uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Box-Muller; one value per call, cached pair discarded for simplicity.
    double normal(double mean, double sd) {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sd * r * std::cos(2.0 * M_PI * u2);
    }

private:
    uint64_t state_;
};

// Deterministic Fisher-Yates shuffle.
template <typename Vec>
void shuffle_vec(Vec& v, Rng& rng) {
    using std::swap;
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.next_below(i));
        swap(v[i - 1], v[j]);
    }
}

}  // namespace nowcast
