#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "rankgan/errors.hpp"

namespace rankgan {

// xoshiro256** with splitmix64 seeding. Self-contained so that streams are
// reproducible bit-for-bit across platforms and serializable in checkpoints.
class Rng {
public:
    Rng() : Rng(0) {}

    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Mixes independent stream identifiers into a fresh seed.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
        std::uint64_t x = a;
        std::uint64_t h = splitmix64(x);
        x ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h ^= splitmix64(x);
        x ^= c + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return splitmix64(x);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    int uniform_int(int n) {
        if (n <= 0) throw ParameterError("uniform_int: n must be positive");
        return static_cast<int>(next() % static_cast<std::uint64_t>(n));
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        // Box-Muller without cached spare so the state stays 4 words.
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586 * u2);
    }

    Rng fork(std::uint64_t stream) const {
        return Rng(mix(state_[0] ^ state_[2], state_[1] ^ state_[3], stream));
    }

    const std::array<std::uint64_t, 4>& state() const { return state_; }
    void set_state(const std::array<std::uint64_t, 4>& s) { state_ = s; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
};

}  // namespace rankgan
