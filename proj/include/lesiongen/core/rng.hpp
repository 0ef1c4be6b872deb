#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace lesiongen {

// splitmix64 step; used to derive independent stream seeds from (seed, a, b).
uint64_t mix_seed(uint64_t seed, uint64_t a = 0, uint64_t b = 0);

// Deterministic random source. mt19937_64 is fully specified by the standard
// and the normal/uniform transforms below are our own, so identical seeds give
// identical streams across compilers and standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0,1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller. Always consumes two uniforms and keeps
    // no spare, so the stream position is a pure function of the call count.
    double normal();

    // Uniform integer in [lo, hi], inclusive. Rejection sampling, no modulo bias.
    int64_t uniform_int(int64_t lo, int64_t hi);

    // Fisher-Yates using uniform_int.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    void fill_normal(std::vector<float>& out, double scale = 1.0);

private:
    std::mt19937_64 gen_;
};

}  // namespace lesiongen
