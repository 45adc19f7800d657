#pragma once

#include <cstdint>
#include <string_view>

namespace raccon {

/// Counter-based seed derivation. Every sub-seed in a run is
/// splitmix64(master ^ hash(domain) + index), so any campaign, environment or
/// training job can be re-run in isolation from (master_seed, domain, index).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view domain,
                                    std::uint64_t index) noexcept {
    return splitmix64(splitmix64(master ^ fnv1a(domain)) + index);
}

/// Uniform double in [0, 1) from a 64-bit hash.
constexpr double unit_interval(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

} // namespace raccon
