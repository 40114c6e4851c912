#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "dmib/error.hpp"

namespace dmib {

// Little-endian primitives for the binary cache/checkpoint formats, written
// byte by byte so files are identical across hosts.

inline void write_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void write_f64(std::ostream& os, double v) {
  write_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const int c = is.get();
    if (c < 0) throw DataError("binary read: unexpected end of file");
    v |= static_cast<std::uint32_t>(c) << (8 * i);
  }
  return v;
}

inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = is.get();
    if (c < 0) throw DataError("binary read: unexpected end of file");
    v |= static_cast<std::uint64_t>(c) << (8 * i);
  }
  return v;
}

inline double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64(is)); }

inline std::string read_string(std::istream& is) {
  const std::uint64_t n = read_u64(is);
  if (n > (1ULL << 32)) throw DataError("binary read: implausible string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::uint64_t>(is.gcount()) != n)
    throw DataError("binary read: unexpected end of file");
  return s;
}

}  // namespace dmib
