#pragma once

// SplitRng — the project's single random source, algorithm id "lpsplit/1".
// Counter-based and splittable so every consumer derives its own stream
// from (seed, labels) alone; see docs/determinism.md for the full spec.
//
//   output(i)            = mix64(key + (i+1) * GOLDEN)      (splitmix64)
//   split(label, a,b,c)  = new key by chaining mix64(key ^ h) over
//                          fnv1a64(label), a, b, c
//   unit()               = 53-bit mantissa in [0, 1)
//   gaussian()           = Marsaglia polar method (pairs cached)
//   below(n)             = 128-bit multiply-shift range reduction
//
// Two generators with the same key produce the same stream on any platform;
// gaussian() additionally depends on libm's sqrt/log rounding, which is
// identical across runs on one platform.

#include <cstdint>
#include <cmath>
#include <string_view>
#include <utility>
#include <vector>

namespace labelprop {

class SplitRng {
public:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static std::uint64_t fnv1a64(std::string_view s) {
        std::uint64_t h = 0xCBF29CE484222325ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001B3ull;
        }
        return h;
    }

    explicit SplitRng(std::uint64_t seed) : key_(mix64(seed ^ kGolden)) {}

    // Child generator for an independent, reproducible stream.
    SplitRng split(std::string_view label, std::uint64_t a = 0,
                   std::uint64_t b = 0, std::uint64_t c = 0) const {
        std::uint64_t k = key_;
        k = mix64(k ^ fnv1a64(label));
        k = mix64(k ^ a);
        k = mix64(k ^ b);
        k = mix64(k ^ c);
        return SplitRng(k, 0);
    }

    std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

    // Uniform in [0, 1), 53 random mantissa bits.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in {0, ..., n-1} via multiply-shift.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal, Marsaglia polar method. Consumes pairs of uniforms
    // and caches the spare deviate.
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_unit() - 1.0;
            v = 2.0 * next_unit() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    std::vector<double> gaussian_vector(std::size_t n) {
        std::vector<double> out(n);
        for (auto& x : out) x = next_gaussian();
        return out;
    }

    // In-place Fisher–Yates.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    std::uint64_t key() const { return key_; }

private:
    SplitRng(std::uint64_t key, int) : key_(key) {}

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace labelprop
