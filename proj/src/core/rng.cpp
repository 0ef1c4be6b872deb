#include "lesiongen/core/rng.hpp"

#include <cmath>

namespace lesiongen {

uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
    auto split = [](uint64_t& s) {
        s += 0x9e3779b97f4a7c15ull;
        uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    };
    uint64_t s = seed;
    uint64_t out = split(s);
    s ^= a * 0xff51afd7ed558ccdull;
    out ^= split(s);
    s ^= b * 0xc4ceb9fe1a85ec53ull;
    out ^= split(s);
    return out;
}

double Rng::normal() {
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<int64_t>(next_u64());  // full range
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return lo + static_cast<int64_t>(v % span);
}

void Rng::fill_normal(std::vector<float>& out, double scale) {
    for (auto& v : out) v = static_cast<float>(normal() * scale);
}

}  // namespace lesiongen
