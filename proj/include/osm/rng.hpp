#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace osm {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// mt19937_64 with hand-rolled transforms. The engine's output sequence is
// pinned by the standard; std::normal_distribution and friends are not, so
// all distribution math lives here to keep runs reproducible everywhere.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    // Independent deterministic stream for (seed, stream), e.g. per-epoch shuffles.
    static Rng for_stream(uint64_t seed, uint64_t stream) {
        return Rng(splitmix64(splitmix64(seed) ^ splitmix64(stream)));
    }

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Box-Muller, two engine draws per call.
    double normal(double mean = 0.0, double sigma = 1.0) {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Uniform integer in [0, n), n >= 1; rejects the biased tail.
    uint64_t next_below(uint64_t n) {
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x = eng_();
        while (x >= limit) x = eng_();
        return x % n;
    }

    // Fisher-Yates; std::shuffle is implementation-defined, this is not.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace osm
