#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace caest {

/// SplitMix64 finalizer (Steele, Lea & Flood). Used for seeding only.
inline std::uint64_t splitmix64_next(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/**
 * xoshiro256** (Blackman & Vigna) with SplitMix64 seeding.
 *
 * Satisfies UniformRandomBitGenerator. Sub-streams for Monte Carlo
 * replications are derived with for_stream(seed, index): the pair is hashed
 * through SplitMix64 into a fresh 256-bit state, so distinct indices give
 * unrelated sequences.
 */
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

    static Rng for_stream(std::uint64_t seed, std::uint64_t stream)
    {
        std::uint64_t s = seed;
        const std::uint64_t a = splitmix64_next(s);
        std::uint64_t t = stream ^ 0xD1B54A32D192ED03ULL;
        const std::uint64_t b = splitmix64_next(t);
        return Rng(a ^ (b * 0x9E3779B97F4A7C15ULL) ^ stream);
    }

    void reseed(std::uint64_t seed)
    {
        std::uint64_t sm = seed;
        for (auto& w : s_)
            w = splitmix64_next(sm);
        has_spare_ = false;
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on the open interval (0, 1): (k + 0.5) / 2^53.
    double uniform()
    {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    /**
     * Standard normal by Marsaglia's polar method: draw (u, v) uniform on
     * (-1, 1)^2 until 0 < s = u^2 + v^2 < 1, then u * f and v * f with
     * f = sqrt(-2 log s / s) are independent N(0, 1). The second value is
     * cached for the next call.
     */
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4]{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace caest
