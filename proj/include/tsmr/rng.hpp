#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace tsmr {

// Deterministic random source. The engine (mt19937_64) is fully specified by
// the standard, and all sampling below is hand-rolled so that streams are
// reproducible across standard-library implementations. std::*_distribution
// must not be used anywhere in this codebase.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], bounds inclusive. Modulo bias is
    // negligible for the small ranges used here.
    long uniform_int(long lo, long hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo + 1);
        return lo + static_cast<long>(next_u64() % span);
    }

    // Uniform index in [0, n).
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

    bool chance(double p) { return uniform() < p; }

    // Box-Muller, one variate per call (the companion variate is discarded
    // to keep the stream position independent of call history).
    double normal(double mean = 0.0, double sd = 1.0) {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sd * r * std::cos(2.0 * M_PI * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Derives independent stream seeds from a base seed and up to two indices.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t s = base;
    std::uint64_t h = splitmix64(s);
    s ^= a + 0x9E3779B97F4A7C15ULL;
    h ^= splitmix64(s);
    s ^= b + 0xD1B54A32D192ED03ULL;
    h ^= splitmix64(s);
    return h;
}

} // namespace tsmr
