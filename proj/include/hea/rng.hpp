#pragma once
// Deterministic RNG substreams. A single run seed fans out to named
// streams (split, init, masking, bootstrap, ...) so each component is
// independently reproducible.

#include <cstdint>
#include <random>
#include <string_view>

namespace hea {

// FNV-1a, fixed across platforms (std::hash is not).
constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

inline std::mt19937_64 substream(std::uint64_t seed, std::string_view name,
                                 std::uint64_t index = 0) {
    std::uint64_t h = fnv1a(name);
    h ^= seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= index * 0xbf58476d1ce4e5b9ull;
    return std::mt19937_64(h);
}

}  // namespace hea
