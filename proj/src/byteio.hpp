#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>

namespace sei::detail {

template <typename U>
void put_le(std::ostream& os, U value) {
    char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    os.write(bytes, sizeof(U));
}

template <typename U>
U get_le(std::istream& is) {
    unsigned char bytes[sizeof(U)]{};
    is.read(reinterpret_cast<char*>(bytes), sizeof(U));
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
    return value;
}

inline void put_f32(std::ostream& os, float v) { put_le(os, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }
inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_le<std::uint32_t>(is)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_le<std::uint64_t>(is)); }

}  // namespace sei::detail
