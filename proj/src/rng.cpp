#include "hud/rng.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace hud {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

uint64_t fnv1a64(const void* data, size_t n, uint64_t h) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t RngStream::next_bits() {
    uint64_t v = splitmix64(seed ^ splitmix64(counter));
    ++counter;
    return v;
}

double RngStream::uniform() {
    // (0, 1]: never returns 0 so log() stays finite.
    uint64_t bits = next_bits() >> 11;  // 53 bits
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

double RngStream::normal() {
    double u1 = uniform();
    double u2 = uniform();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

uint64_t RngStream::uniform_int(uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
    // Rejection sampling keeps the distribution exactly uniform.
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = next_bits();
    while (v >= limit) v = next_bits();
    return v % n;
}

RngStream RngStream::derive(uint64_t tag, uint64_t index) const {
    RngStream s;
    s.seed = splitmix64(seed ^ splitmix64(tag ^ splitmix64(index)));
    return s;
}

}  // namespace hud
