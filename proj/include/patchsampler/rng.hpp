// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace patchsampler {

// SplitMix64 (Steele, Lea, Vigna): a small, fully specified generator.
// Every random draw in the pipeline flows through this class so that results
// are reproducible across platforms and standard libraries. Substreams are
// derived by mixing a stream tag into the root seed, so independent parts of
// a computation (one hash bit, one bucket) can draw in any order.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Unbiased uniform draw in [0, bound) via rejection.
    std::uint64_t uniform_below(std::uint64_t bound) {
        const std::uint64_t threshold = -bound % bound;  // 2^64 mod bound
        for (;;) {
            std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    double uniform01() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller (used only by test data generators).
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Derives a substream seed from (root seed, tag) with an extra mix round
    // so adjacent tags do not produce overlapping sequences.
    static std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) {
        SplitMix64 g(seed ^ (0x8e9c5f3b9a7d2c41ULL * (tag + 1)));
        g.next();
        return g.next();
    }

private:
    std::uint64_t state_;
};

// Draws k distinct indices from [0, n) by partial Fisher-Yates over an index
// vector; output is in draw order, deterministic for a given generator state.
std::vector<std::uint32_t> sample_without_replacement(SplitMix64& rng,
                                                      std::uint32_t n,
                                                      std::uint32_t k);

}  // namespace patchsampler
