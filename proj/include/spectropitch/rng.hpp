#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace spectropitch {

// splitmix64 finalizer. Bijective on u64, so distinct inputs always give
// distinct outputs; used to derive independent per-entry seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return mix_seed(master + 0x9E3779B97F4A7C15ull * (stream + 1));
}

// mt19937_64 with explicit bit-to-double mapping. std::uniform_real_distribution
// is implementation-defined, so the mapping is done by hand to keep generated
// data identical for a given seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // unbiased integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = n * (UINT64_MAX / n);
        std::uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return v % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[next_below(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace spectropitch
