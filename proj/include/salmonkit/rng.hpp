#pragma once

#include <cmath>
#include <cstdint>

namespace salmon {

// SplitMix64 step; used to spread a user seed into stream seeds.
inline std::uint64_t split_mix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// PCG32 (pcg-random.org, XSH-RR variant). Chosen over std distributions so
// that generated fixtures are bit-identical across platforms and languages.
class Pcg32 {
public:
    explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0x14057b7ef767814fULL) {
        state_ = 0u;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        auto rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    // Uniform in [0, 1), 32 bits of resolution.
    double uniform() { return next_u32() * 0x1.0p-32; }

    // Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] inclusive, unbiased via rejection.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        auto range = static_cast<std::uint64_t>(hi - lo) + 1u;
        std::uint64_t threshold = (0u - range) % range;
        for (;;) {
            std::uint64_t r = (static_cast<std::uint64_t>(next_u32()) << 32) | next_u32();
            if (r >= threshold)
                return lo + static_cast<std::int64_t>(r % range);
        }
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; deterministic (no cached spare state).
    double gaussian(double mean = 0.0, double sigma = 1.0) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0)
            u1 = 0x1.0p-33;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

} // namespace salmon
