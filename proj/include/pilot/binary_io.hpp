#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pilot/error.hpp"

namespace pilot::binary {

// Little-endian writers/readers for the snapshot and checkpoint formats.

template <typename U>
inline U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) out = (out << 8) | ((v >> (8 * i)) & 0xFF);
    return out;
  }
  return v;
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64(std::ostream& os, double d) {
  auto bits = to_little(std::bit_cast<std::uint64_t>(d));
  os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}

inline void write_f64s(std::ostream& os, std::span<const double> values) {
  for (double d : values) write_f64(os, d);
}

inline void write_magic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw LoadError("unexpected end of file");
  return to_little(v);
}

inline double read_f64(std::istream& is) {
  std::uint64_t bits = 0;
  if (!is.read(reinterpret_cast<char*>(&bits), sizeof bits)) throw LoadError("unexpected end of file");
  return std::bit_cast<double>(to_little(bits));
}

inline std::vector<double> read_f64s(std::istream& is, std::size_t n) {
  std::vector<double> out(n);
  for (double& d : out) d = read_f64(is);
  return out;
}

inline void expect_magic(std::istream& is, std::string_view magic) {
  std::string got(magic.size(), '\0');
  if (!is.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
    throw LoadError("bad magic: expected \"" + std::string(magic) + "\"");
  }
}

}  // namespace pilot::binary
