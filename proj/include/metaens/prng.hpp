#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

namespace metaens {

// splitmix64, used for seeding and for deriving independent child seeds.
// Stepping the same state always yields the same sequence on every platform.
struct SplitMix64 {
    uint64_t state;

    explicit SplitMix64(uint64_t seed) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

// xoshiro256** seeded via splitmix64. All randomized code in the project goes
// through this generator so results are bit-identical across platforms;
// std::mt19937 + std::*_distribution are deliberately avoided (distributions
// are not portable across standard libraries).
class Rng {
public:
    explicit Rng(uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& w : s_) w = sm.next();
    }

    uint64_t next_u64() {
        uint64_t result = rotl(s_[1] * 5, 7) * 9;
        uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform double in [0, 1), 53-bit resolution.
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    // Uniform double in (0, 1]; safe as a log() argument.
    double uniform_pos() { return ((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n >= 1. Rejection-free modulo bias is not a
    // concern for n many orders below 2^64, but keep the textbook rejection
    // loop so draws are exactly uniform.
    uint64_t below(uint64_t n) {
        uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller, one value per call (the sine twin is
    // discarded to keep the stream position independent of call pairing).
    double normal() {
        double u1 = uniform_pos();
        double u2 = uniform();
        return box_muller_cos(u1, u2);
    }

    // Fisher-Yates; identical permutation for identical seed and size.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    static double box_muller_cos(double u1, double u2);

    uint64_t s_[4];
};

// Child seed for a parallel unit of work (tree index, dataset index, ...).
// Pre-deriving per-unit seeds keeps results independent of thread scheduling.
uint64_t derive_seed(uint64_t master, uint64_t stream);

// FNV-1a 64-bit over a byte range.
uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL);
uint64_t fnv1a64_str(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace metaens
