#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>

namespace mobforge {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

// FNV-1a folded through splitmix, for keying streams by text.
inline constexpr std::uint64_t mix_seed(std::uint64_t a, std::string_view tag) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return mix_seed(a, h);
}

// Counter-based generator: the n-th draw is a pure function of (key, n), so
// streams are reproducible regardless of thread scheduling and independent of
// the standard library's distribution implementations.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return splitmix64(key_ ^ splitmix64(++counter_)); }

    // [0, 1) with 53 bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // [0, n); n > 0.
    std::uint64_t uniform_int(std::uint64_t n) {
        // Lemire's multiply-shift with rejection keeps it unbiased.
        while (true) {
            const std::uint64_t x = next_u64();
            const __uint128_t m = static_cast<__uint128_t>(x) * n;
            const auto low = static_cast<std::uint64_t>(m);
            if (low >= n || low >= (-n) % n) return static_cast<std::uint64_t>(m >> 64);
        }
    }

    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi_inclusive) {
        return lo + static_cast<std::int64_t>(uniform_int(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
    }

    double normal() {
        // Box-Muller; draws two uniforms per call.
        double u1 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Index drawn proportionally to nonnegative weights; returns weights.size()
    // when all weights are zero.
    template <class W>
    std::size_t weighted(std::span<const W> weights) {
        double total = 0.0;
        for (auto w : weights) total += static_cast<double>(w);
        if (!(total > 0.0)) return weights.size();
        double target = uniform() * total;
        std::size_t last_positive = weights.size();
        for (std::size_t i = 0; i < weights.size(); ++i) {
            const auto w = static_cast<double>(weights[i]);
            if (w <= 0.0) continue;
            last_positive = i;
            if (target < w) return i;
            target -= w;
        }
        return last_positive;
    }

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace mobforge
