#pragma once

#include <cmath>
#include <cstdint>

#include "qrelax/numerics.hpp"

namespace qrelax::rng {

// SplitMix64 (Steele, Lea & Flood); used to expand seeds and derive streams.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
};

// xoshiro256++ (Blackman & Vigna), state seeded through SplitMix64.
class Xoshiro256pp {
public:
    explicit Xoshiro256pp(std::uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& w : s_) w = sm.next();
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x9E3779B97F4A7C15ull;
    }

    std::uint64_t next() {
        std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0,1), 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform on (0,1]; safe as a log argument.
    double uniform01_open_at_zero() {
        return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

// Standard normal draws via Box-Muller on top of the uniform stream.
// Fixed consumption: two uniforms per pair of normals.
class NormalSampler {
public:
    explicit NormalSampler(Xoshiro256pp gen) : gen_(gen) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = gen_.uniform01_open_at_zero();
        double u2 = gen_.uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * numerics::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double uniform01() {
        // Draws bypass the normal cache; consumption stays deterministic.
        return gen_.uniform01();
    }

private:
    Xoshiro256pp gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Deterministic per-trajectory stream: the (seed, index) pair is folded
// through SplitMix64 so ensembles are reproducible for any execution order.
inline Xoshiro256pp make_stream(std::uint64_t seed, std::uint64_t stream_index) {
    return Xoshiro256pp(seed + 0x9E3779B97F4A7C15ull * (stream_index + 1));
}

inline NormalSampler make_normal_stream(std::uint64_t seed, std::uint64_t stream_index) {
    return NormalSampler(make_stream(seed, stream_index));
}

} // namespace qrelax::rng
