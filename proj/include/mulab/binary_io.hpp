#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>

#include "mulab/error.hpp"

// Little-endian primitives shared by the model and dataset file formats.
namespace mulab::binio {

template <typename T>
constexpr T byteswap(T value) noexcept {
    static_assert(std::is_trivially_copyable_v<T>);
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    return std::bit_cast<T>(bytes);
}

template <typename T>
void write_le(std::ostream& os, T value) {
    static_assert(std::is_arithmetic_v<T>);
    if constexpr (std::endian::native == std::endian::big) value = byteswap(value);
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const char* what) {
    static_assert(std::is_arithmetic_v<T>);
    T value{};
    if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        throw FormatError(std::string("truncated file while reading ") + what);
    }
    if constexpr (std::endian::native == std::endian::big) value = byteswap(value);
    return value;
}

inline void write_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
    char got[4] = {};
    if (!is.read(got, 4)) throw FormatError("truncated file: missing magic bytes");
    if (std::memcmp(got, magic, 4) != 0) {
        throw FormatError(std::string("bad magic: expected \"") + magic + "\"");
    }
}

}  // namespace mulab::binio
