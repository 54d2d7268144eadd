#pragma once

#include <cstdint>
#include <vector>

namespace rpnet {

// splitmix64 finalizer.
inline uint64_t mix64(uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

// Derives a child seed from (seed, tag). All randomness in the pipeline flows
// from one master seed through chains of these derivations (per fold, per
// epoch, per batch), so any sub-run is independently reproducible.
inline uint64_t derive_seed(uint64_t seed, uint64_t tag) {
    return mix64(seed + 0x9E3779B97F4A7C15ULL * (tag + 1));
}

// Deterministic generator (splitmix64 stream). Distribution helpers are
// hand-rolled so sequences do not depend on the standard library
// implementation.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Uniform integer in [lo, hi], inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
        if (range == 0) return static_cast<int64_t>(next_u64());  // full range
        uint64_t bound = UINT64_MAX - UINT64_MAX % range;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= bound);
        return lo + static_cast<int64_t>(x % range);
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    Rng split(uint64_t tag) { return Rng(derive_seed(state_, tag)); }

private:
    uint64_t state_;
};

// Tags for the documented seed-splitting scheme.
namespace seed_tag {
constexpr uint64_t fold = 0x464F4C44;     // "FOLD"
constexpr uint64_t epoch = 0x45504F43;    // "EPOC"
constexpr uint64_t init = 0x494E4954;     // "INIT"
constexpr uint64_t shuffle = 0x53484646;  // "SHFF"
constexpr uint64_t batch = 0x42415443;    // "BATC"
constexpr uint64_t strat = 0x53545241;    // "STRA"
}  // namespace seed_tag

}  // namespace rpnet
