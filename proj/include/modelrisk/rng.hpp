// Counter-based random number generation (Philox4x32-10) and the sampling
// primitives built on top of it. Every stochastic component of the library
// draws from this generator so that runs are reproducible bit-for-bit from a
// single seed, and parallel work can be split into independent substreams.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace modelrisk {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline void philox_round(std::array<std::uint32_t, 4>& ctr,
                         const std::array<std::uint32_t, 2>& key) {
    const std::uint64_t p0 = 0xD2511F53ULL * ctr[0];
    const std::uint64_t p1 = 0xCD9E8D57ULL * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

} // namespace detail

/// Philox4x32-10 counter-based generator. A generator is identified by
/// (seed, stream); substream(id) derives a statistically independent stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), counter_(0), buffered_(0), have_normal_(false),
          cached_normal_(0.0) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// Derive an independent generator; deriving with the same id twice
    /// yields the same stream.
    Rng substream(std::uint64_t id) const {
        const std::uint64_t s = detail::splitmix64(stream_ ^ detail::splitmix64(id + 0x51ED2701ULL));
        return Rng(seed_, s);
    }

    std::uint64_t next_u64() {
        if (buffered_ == 0) refill();
        --buffered_;
        const std::uint64_t lo = out_[2 * buffered_];
        const std::uint64_t hi = out_[2 * buffered_ + 1];
        return (hi << 32) | lo;
    }

    /// Uniform draw strictly inside (0, 1).
    double uniform() {
        const double u = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
        return mirror_ ? 1.0 - u : u;
    }

    /// A copy that replays the same stream with uniforms reflected to 1 - u
    /// (antithetic partner; normals come out negated through the polar
    /// method).
    Rng antithetic() const {
        Rng c = *this;
        c.mirror_ = !c.mirror_;
        return c;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Standard normal via the Marsaglia polar method (pair-cached).
    double normal() {
        if (have_normal_) {
            have_normal_ = false;
            return cached_normal_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        cached_normal_ = v * m;
        have_normal_ = true;
        return u * m;
    }

    double exponential() { return -std::log(uniform()); }

    /// Gamma(shape, scale) via Marsaglia-Tsang, with the usual boost for
    /// shape < 1.
    double gamma(double shape, double scale) {
        if (shape <= 0.0 || scale <= 0.0)
            throw std::invalid_argument("gamma: shape and scale must be positive");
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
        }
    }

    double chi_squared(double df) { return gamma(0.5 * df, 2.0); }

    double student_t(double df) {
        const double z = normal();
        const double g = chi_squared(df);
        return z / std::sqrt(g / df);
    }

    double beta(double a, double b) {
        const double x = gamma(a, 1.0);
        const double y = gamma(b, 1.0);
        return x / (x + y);
    }

    /// Inverse gamma in the (A, B) convention used throughout the estimator:
    /// density proportional to x^{-(A+2)/2} exp(-B / (2x)), i.e. shape A/2 and
    /// rate B/2 in the standard parameterization.
    double inv_gamma_ab(double a, double b) {
        return 0.5 * b / gamma(0.5 * a, 1.0);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    void refill() {
        std::array<std::uint32_t, 4> ctr = {
            static_cast<std::uint32_t>(counter_),
            static_cast<std::uint32_t>(counter_ >> 32),
            static_cast<std::uint32_t>(stream_),
            static_cast<std::uint32_t>(stream_ >> 32)};
        const std::array<std::uint32_t, 2> key0 = {
            static_cast<std::uint32_t>(seed_),
            static_cast<std::uint32_t>(seed_ >> 32)};
        std::array<std::uint32_t, 2> key = key0;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9U;
                key[1] += 0xBB67AE85U;
            }
            detail::philox_round(ctr, key);
        }
        out_ = ctr;
        ++counter_;
        buffered_ = 2;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_;
    bool mirror_ = false;
    std::array<std::uint32_t, 4> out_{};
    int buffered_;
    bool have_normal_;
    double cached_normal_;
};

} // namespace modelrisk
