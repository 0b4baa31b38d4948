#include "mulab/rng.hpp"

#include <cmath>
#include <numbers>

namespace mulab {

double Rng::uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    if (n <= 1) return 0;
    // Largest multiple of n representable in 64 bits; values at or above it are rejected.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n + 1) % n;
    std::uint64_t x = next();
    while (x > limit) x = next();
    return x % n;
}

double Rng::normal() {
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t tag_id(std::string_view tag) noexcept {
    // FNV-1a
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) noexcept {
    std::uint64_t s = splitmix64(base);
    for (auto t : tags) s = splitmix64(s ^ splitmix64(t));
    return s;
}

}  // namespace mulab
