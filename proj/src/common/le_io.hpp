#pragma once

// Little-endian float serialization shared by the embedding archive and
// checkpoint writers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

namespace xdd::detail {

template <typename UInt>
UInt to_little(UInt v) {
  if constexpr (std::endian::native == std::endian::big) {
    UInt out = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      out = (out << 8) | (v & 0xFF);
      v >>= 8;
    }
    return out;
  } else {
    return v;
  }
}

inline void write_f32(std::ostream& out, std::span<const double> values) {
  for (double v : values) {
    auto bits = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
  }
}

inline void write_f64(std::ostream& out, std::span<const double> values) {
  for (double v : values) {
    auto bits = to_little(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
  }
}

/// Reads `count` values; returns false on a short read.
inline bool read_f32(std::istream& in, std::size_t count, std::vector<double>& out) {
  out.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof(bits))) return false;
    out[i] = static_cast<double>(std::bit_cast<float>(to_little(bits)));
  }
  return true;
}

inline bool read_f64(std::istream& in, std::size_t count, std::vector<double>& out) {
  out.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof(bits))) return false;
    out[i] = std::bit_cast<double>(to_little(bits));
  }
  return true;
}

}  // namespace xdd::detail
