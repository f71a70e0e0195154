#pragma once

// Deterministic random number generation. One algorithm project-wide:
// SplitMix64 (Steele, Lea, Flood 2014), a 64-bit counter-based generator.
// Identical seeds produce identical sequences on every platform, which is
// what makes "seed" fully determine an experiment.

#include <cmath>
#include <cstdint>
#include <string_view>

namespace esnnet {

class RngStream {
  public:
    RngStream() = default;
    explicit RngStream(std::uint64_t seed) : seed_(seed), state_(seed) {}

    /// Next raw 64-bit word.
    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    /// Integer uniform on [lo, hi] inclusive, by rejection (unbiased).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % span;
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return lo + static_cast<std::int64_t>(r % span);
    }

    /// Bernoulli draw.
    bool bernoulli(double p) { return next_unit() < p; }

    /// Standard normal via Box-Muller. The second value of each pair is
    /// cached so draw counts stay deterministic.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_unit();
        while (u1 <= 0.0) u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Derive an independent stream from this stream's seed and a label.
    /// Forking depends only on the constructor seed, never on how many draws
    /// were taken, so parallel and serial orchestration get identical
    /// sub-streams.
    RngStream fork(std::string_view label, std::uint64_t index = 0) const {
        std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a over the label
        for (const char ch : label) {
            h ^= static_cast<std::uint8_t>(ch);
            h *= 0x100000001B3ULL;
        }
        h ^= 0x9E3779B97F4A7C15ULL * (index + 1);
        RngStream probe(seed_ ^ (h + 0x9E3779B97F4A7C15ULL + (seed_ << 6) + (seed_ >> 2)));
        return RngStream(probe.next_u64());
    }

    std::uint64_t seed() const { return seed_; }

  private:
    std::uint64_t seed_ = 0;
    std::uint64_t state_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace esnnet
