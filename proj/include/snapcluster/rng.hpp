#pragma once
// Deterministic, platform-independent random number helpers. Nothing here
// depends on std:: distributions, whose output differs across standard
// library implementations.
#include <cstdint>

namespace snapcluster {

// SplitMix64 finalizer: a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Counter-based hash keyed on (seed, i, j). Any entry of a random matrix can
// be regenerated independently of every other entry.
constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t i, std::uint64_t j) {
    std::uint64_t h = mix64(seed ^ 0x6A09E667F3BCC909ull);
    h = mix64(h ^ i);
    h = mix64(h ^ (j * 0xD1B54A32D192ED03ull));
    return h;
}

// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Seed for repetition `rep` of an ensemble rooted at `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t rep) {
    return mix64(mix64(seed) + 0xA0761D6478BD642Full * (rep + 1));
}

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    double uniform() { return to_unit(next()); }

    // Uniform integer in [0, n) without modulo bias.
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t limit = ~0ull - (~0ull % n);
        std::uint64_t v;
        do {
            v = next();
        } while (v >= limit);
        return v % n;
    }

    // Standard normal via Box-Muller.
    double normal();

private:
    std::uint64_t state_;
};

}  // namespace snapcluster
