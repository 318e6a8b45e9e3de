#pragma once

#include <cstddef>
#include <cstdint>

namespace hud {

/// Counter-based deterministic random stream. Each draw hashes
/// (seed, counter) with splitmix64, so the k-th variate of a stream is a
/// pure function of (seed, k) regardless of evaluation order, and streams
/// can be derived for independent substreams (per step, per triplet, ...).
struct RngStream {
    uint64_t seed = 0;
    uint64_t counter = 0;

    RngStream() = default;
    explicit RngStream(uint64_t s) : seed(s) {}

    /// Uniform in (0, 1], 53-bit resolution.
    double uniform();
    /// Standard normal via Box-Muller (cosine branch); consumes two counters.
    double normal();
    /// Uniform integer in [0, n), n > 0.
    uint64_t uniform_int(uint64_t n);

    /// Independent substream keyed by (tag, index). Pure function of the
    /// parent seed, never advances the parent counter.
    RngStream derive(uint64_t tag, uint64_t index) const;

    uint64_t next_bits();
};

uint64_t splitmix64(uint64_t x);

/// FNV-1a over a byte buffer, used for config hashes and checkpoint checksums.
uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 1469598103934665603ull);

}  // namespace hud
