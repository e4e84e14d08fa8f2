#include "metaens/prng.hpp"

#include <cmath>

namespace metaens {

double Rng::box_muller_cos(double u1, double u2) {
    // u1 in (0,1] so the log is finite.
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

uint64_t derive_seed(uint64_t master, uint64_t stream) {
    // Two splitmix steps decorrelate master and stream; a plain xor would make
    // (master, stream) and (master^1, stream^1) collide.
    SplitMix64 sm(master);
    uint64_t a = sm.next();
    SplitMix64 sm2(a ^ (stream * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL));
    return sm2.next();
}

uint64_t fnv1a64(const void* data, size_t len, uint64_t h) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t fnv1a64_str(const std::string& s, uint64_t h) {
    return fnv1a64(s.data(), s.size(), h);
}

}  // namespace metaens
