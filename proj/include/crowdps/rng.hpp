#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "crowdps/error.hpp"

namespace crowdps {

namespace detail {

// splitmix64; used to expand seeds and derive substreams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Deterministic random generator with hand-pinned distributions.
///
/// std::*_distribution output is implementation-defined, so every draw here
/// is derived from raw mt19937_64 words with fixed algorithms. Two runs with
/// the same seed produce the same stream on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        // seed the full mt19937_64 state from splitmix64, as recommended
        std::seed_seq seq{detail::splitmix64(s), detail::splitmix64(s),
                          detail::splitmix64(s), detail::splitmix64(s)};
        engine_.seed(seq);
    }

    /// Independent stream derived from (master seed, stream index).
    static Rng substream(std::uint64_t master_seed, std::uint64_t index) {
        std::uint64_t s = master_seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
        return Rng(detail::splitmix64(s));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) {
        if (!(lo < hi)) throw NumericError("uniform: requires lo < hi");
        return lo + (hi - lo) * uniform01();
    }

    /// Uniform integer in [0, bound) by rejection (unbiased).
    std::uint64_t uniform_below(std::uint64_t bound) {
        if (bound == 0) throw NumericError("uniform_below: bound must be positive");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % bound;
    }

    /// Standard normal via Marsaglia polar method.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Uniform sample of n indices from [0, population) without replacement
    /// (partial Fisher-Yates; deterministic under seed).
    std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t n) {
        if (n > population)
            throw DataError("sample size exceeds population size");
        std::vector<std::size_t> idx(population);
        for (std::size_t i = 0; i < population; ++i) idx[i] = i;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(uniform_below(population - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(n);
        return idx;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace crowdps
