#pragma once

#include <cstdint>
#include <random>

namespace plastinet {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seeded RNG wrapper. Every stochastic choice in the library draws from an
/// Rng that is reachable from a single run seed, so identical seeds replay
/// bit-identically.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(gen_);
    }

    double normal(double mean, double stddev) {
        std::normal_distribution<double> d(mean, stddev);
        return d(gen_);
    }

    /// Uniform integer in [lo, hi).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        std::uniform_int_distribution<std::int64_t> d(lo, hi - 1);
        return d(gen_);
    }

    std::uint64_t next_u64() { return gen_(); }

    /// Derive an independent stream keyed by `stream`. Does not disturb this
    /// generator's state, so derivation order is irrelevant.
    Rng split(std::uint64_t stream) const {
        return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x517cc1b727220a95ULL)));
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

} // namespace plastinet
