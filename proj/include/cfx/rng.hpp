// Repo-wide deterministic PRNG (SplitMix64) and stable seed derivation.
// Every stochastic operation in cfxlab takes an explicit seed so whole
// experiment sweeps replay bit-identically.
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace cfx {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Uniform integer in [0, bound). Modulo bias is negligible at 64 bits.
    std::uint64_t next_below(std::uint64_t bound) {
        return next_u64() % bound;
    }

    // Derive an independent child stream.
    SplitMix64 split() { return SplitMix64(next_u64()); }

private:
    std::uint64_t state_;
};

// Stable 64-bit mixing for seed derivation; FNV-1a over the tag followed by
// SplitMix64 finalization of each numeric component. Adding new tags never
// perturbs streams derived under other tags.
inline std::uint64_t seed_mix(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (unsigned char ch : tag) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return SplitMix64(h).next_u64();
}

inline std::uint64_t seed_mix(std::uint64_t seed, std::string_view tag,
                              std::uint64_t a) {
    SplitMix64 g(seed_mix(seed, tag) ^ (a * 0x9e3779b97f4a7c15ULL));
    return g.next_u64();
}

inline std::uint64_t seed_mix(std::uint64_t seed, std::string_view tag,
                              std::uint64_t a, std::uint64_t b) {
    return seed_mix(seed_mix(seed, tag, a), tag, b);
}

// Seeded Fisher-Yates shuffle over indices [0, n).
inline std::vector<int> shuffled_indices(std::size_t n, SplitMix64& rng) {
    std::vector<int> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

// Sample k distinct indices from [0, n) (partial Fisher-Yates).
inline std::vector<int> sample_without_replacement(std::size_t n, std::size_t k,
                                                   SplitMix64& rng) {
    std::vector<int> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace cfx
