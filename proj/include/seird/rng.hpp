#pragma once

#include "seird/common.hpp"

#include <algorithm>
#include <random>
#include <utility>

namespace seird {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// A reproducible random stream identified by (seed, id). The same pair
/// always yields the same draw sequence; independent ids give streams that
/// can be consumed in parallel without coordination.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t id = 0)
        : seed_(seed), id_(id), engine_(mixed(seed, id)) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t id() const { return id_; }

    /// Derives a child stream. sub(k) is deterministic in (seed, id, k) and
    /// distinct ids/k values map to statistically independent streams.
    RngStream sub(std::uint64_t k) const {
        return RngStream(seed_, detail::splitmix64(id_ ^ detail::splitmix64(k + 0x517cc1b727220a95ULL)));
    }

    std::mt19937_64& engine() { return engine_; }

    /// Bin(n, p). Degenerate arguments collapse deterministically:
    /// n <= 0 or p <= 0 -> 0; p >= 1 -> n.
    count_t binomial(count_t n, double p) {
        if (n <= 0 || p <= 0.0) return 0;
        if (p >= 1.0) return n;
        return std::binomial_distribution<count_t>(n, p)(engine_);
    }

    /// Mult(n; p1, p2) via sequential conditional binomials. Exact: the first
    /// component is Bin(n, p1) and the second is Bin(n - y1, p2 / (1 - p1)).
    std::pair<count_t, count_t> multinomial2(count_t n, double p1, double p2) {
        const count_t y1 = binomial(n, p1);
        const double rest = 1.0 - p1;
        if (rest <= 0.0) return {y1, 0};
        const count_t y2 = binomial(n - y1, std::min(1.0, p2 / rest));
        return {y1, y2};
    }

    double normal(double mean, double stddev) {
        if (stddev <= 0.0) return mean;
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

    count_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        return std::poisson_distribution<count_t>(mean)(engine_);
    }

    /// Uniform in [0, 1).
    double uniform() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
    }

private:
    static std::mt19937_64 mixed(std::uint64_t seed, std::uint64_t id) {
        // Two rounds of splitmix decorrelate nearby (seed, id) pairs.
        const std::uint64_t a = detail::splitmix64(seed);
        const std::uint64_t b = detail::splitmix64(a ^ detail::splitmix64(id));
        std::seed_seq seq{a, b, seed, id};
        return std::mt19937_64(seq);
    }

    std::uint64_t seed_;
    std::uint64_t id_;
    std::mt19937_64 engine_;
};

} // namespace seird
