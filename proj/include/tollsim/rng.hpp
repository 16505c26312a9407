#pragma once

#include <cstdint>
#include <string_view>

namespace tollsim {

// Deterministic RNG used everywhere randomness is needed. <random>
// distributions are implementation-defined, so transcripts would not be
// reproducible across standard libraries; xoshiro256** plus an explicit
// u64 -> [0,1) mapping is bit-stable everywhere.
struct SplitMix64 {
    uint64_t state;

    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

class Xoshiro256 {
public:
    explicit Xoshiro256(uint64_t seed) {
        SplitMix64 sm{seed};
        for (auto& word : s_) word = sm.next();
    }

    uint64_t next() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0,1), 53 bits of precision.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in [0, bound). Modulo bias is irrelevant at simulation scale;
    // what matters is that the mapping is fixed.
    uint64_t next_below(uint64_t bound) { return bound == 0 ? 0 : next() % bound; }

    int64_t next_in(int64_t lo, int64_t hi) {  // inclusive range
        return lo + static_cast<int64_t>(next_below(static_cast<uint64_t>(hi - lo + 1)));
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

// Seed for a named concern, derived from the master seed. Adding a consumer
// with a new label never perturbs another label's stream.
inline uint64_t derive_stream_seed(uint64_t master, std::string_view label) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : label) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    SplitMix64 sm{master ^ h};
    return sm.next();
}

}  // namespace tollsim
