#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

namespace azoo::binary {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

/// Appends floats as little-endian IEEE-754 binary32.
inline void put_f32(std::vector<std::uint8_t>& out, std::span<const float> values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * 4);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data() + start, values.data(), values.size() * 4);
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(values[i]);
      for (int b = 0; b < 4; ++b) out[start + 4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
    }
  }
}

inline void get_f32(const std::uint8_t* p, std::span<float> out) {
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), p, out.size() * 4);
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<float>(get_u32(p + 4 * i));
  }
}

}  // namespace azoo::binary
