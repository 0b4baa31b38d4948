#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace mulab {

// Portable pseudo-random source.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The standard <random> distributions are implementation-defined,
// so every derived quantity (uniform doubles, bounded integers, normals,
// shuffles) is computed here with explicit formulas:
//
//   uniform()        = (next() >> 11) * 2^-53
//   uniform_index(n) = rejection sampling on next() against the largest
//                      multiple of n below 2^64
//   normal()         = Box-Muller, one value per call (no caching)
//   shuffle          = Fisher-Yates from the back using uniform_index
//
// Streams for separate purposes are obtained with derive_seed(), which chains
// SplitMix64 over the base seed and a list of tags. Two different tag paths
// give statistically independent streams.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t uniform_index(std::uint64_t n);
    double normal();
    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_index(i));
            std::swap(items[i - 1], items[j]);
        }
    }
    template <typename T>
    void shuffle(std::vector<T>& items) {
        shuffle(std::span<T>(items));
    }

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Hash a short text tag into a 64-bit stream id.
std::uint64_t tag_id(std::string_view tag) noexcept;

// Seed for the stream named by (base, tags...).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) noexcept;

}  // namespace mulab
