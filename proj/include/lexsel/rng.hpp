#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "lexsel/common.hpp"

namespace lexsel {

// Counter-based generator: output depends only on (key, counter), keys are
// derived by hashing, so independent substreams can be drawn in parallel and
// replayed exactly. splitmix64 finalizer as the mixing function.
class CounterRng {
  public:
    explicit CounterRng(uint64_t seed, uint64_t stream = 0)
        : key_(mix(mix(seed + 0x9e3779b97f4a7c15ull) ^ mix(stream + 0xbf58476d1ce4e5b9ull))) {}

    // Independent stream; safe to hand to parallel workers.
    CounterRng substream(uint64_t index) const {
        CounterRng r(0);
        r.key_ = mix(key_ ^ mix(index + 0x94d049bb133111ebull));
        r.counter_ = 0;
        return r;
    }

    uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

    // Uniform in [0, 1): top 53 bits.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, n) by rejection.
    uint64_t next_below(uint64_t n) {
        if (n == 0) throw numeric_error("next_below: n must be positive");
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller (no cached spare, keeps replay trivial).
    double next_normal() {
        double u1, u2;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // Index sampled from an (unnormalized) nonnegative weight vector.
    int next_categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw numeric_error("next_categorical: weights sum to zero");
        double u = next_double() * total;
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return int(i);
        }
        return int(weights.size()) - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = size_t(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    static uint64_t mix(uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    uint64_t key_;
    uint64_t counter_ = 0;
};

}  // namespace lexsel
