#ifndef ZIBC_RNG_HPP
#define ZIBC_RNG_HPP

#include <cmath>
#include <cstdint>

#include "zibc/errors.hpp"

namespace zibc {

/// Identifies one independent random stream. Streams keyed by
/// (seed, replication, study, row) never depend on execution order, so
/// parallel simulation runs are bit-reproducible.
struct RngKey {
    std::uint64_t seed = 0;
    std::uint64_t replication = 0;
    std::uint64_t study = 0;
    std::uint64_t row = 0;
};

namespace rng_detail {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace rng_detail

/// Small counter-based generator (splitmix64 stream) with the samplers the
/// simulation needs. Sampling algorithms are written out explicitly so output
/// does not depend on standard-library distribution internals.
class CounterRng {
public:
    explicit CounterRng(const RngKey& key) {
        using rng_detail::mix64;
        state_ = mix64(key.seed);
        state_ = mix64(state_ ^ mix64(key.replication ^ 0xD6E8FEB86659FD93ULL));
        state_ = mix64(state_ ^ mix64(key.study ^ 0xA5A3564E4BD5A4FBULL));
        state_ = mix64(state_ ^ mix64(key.row ^ 0x589965CC75374CC3ULL));
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller; the second deviate is cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    /// Poisson sampling: Knuth's product method for small means, halving
    /// recursion above it (Poisson(m) = Poisson(m/2) + Poisson(m/2)).
    long poisson(double mu) {
        if (!(mu >= 0.0) || !std::isfinite(mu)) {
            throw DomainError("Poisson mean must be finite and nonnegative");
        }
        long total = 0;
        while (mu > 60.0) {
            mu *= 0.5;
            total += poisson_knuth(mu);
        }
        return total + poisson_knuth(mu);
    }

private:
    long poisson_knuth(double mu) {
        if (mu == 0.0) {
            return 0;
        }
        const double limit = std::exp(-mu);
        long k = 0;
        double prod = 1.0;
        do {
            ++k;
            prod *= uniform();
        } while (prod > limit);
        return k - 1;
    }

    std::uint64_t state_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace zibc

#endif
