#pragma once

#include <cstdint>
#include <cmath>

namespace uwno {

// Seeded xoshiro256** generator (splitmix64-expanded seed). All stochastic
// choices in the library draw from an explicitly threaded instance of this
// class, so a run is fully determined by its seed.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& s : state_) {
            // splitmix64
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            s = z ^ (z >> 31);
        }
    }

    uint64_t next() {
        uint64_t* s = state_;
        uint64_t result = rotl(s[1] * 5, 7) * 9;
        uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }

    // uniform in [0, 1) with 24-bit resolution
    float uniform() {
        return static_cast<float>(next() >> 40) * (1.0f / 16777216.0f);
    }

    float uniform(float lo, float hi) {
        return lo + uniform() * (hi - lo);
    }

    // standard normal via Box-Muller (two fresh uniforms per draw)
    float normal() {
        double u1 = static_cast<double>((next() >> 11) + 1) * (1.0 / 9007199254740992.0);
        double u2 = static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
        return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) *
                                  std::cos(2.0 * 3.14159265358979323846 * u2));
    }

    // integer in [0, n); n > 0 (modulo, bias irrelevant at our scales)
    uint64_t below(uint64_t n) { return next() % n; }

private:
    static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }
    uint64_t state_[4];
};

} // namespace uwno
