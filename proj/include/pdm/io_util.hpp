#pragma once

// Small endian-explicit binary stream helpers shared by the file formats.
// All multi-byte integers are little-endian on disk unless a reader says
// otherwise (IDX is big-endian). Read failures throw DataError with the
// caller-supplied context.

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "pdm/error.hpp"

namespace pdm::io {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(os, b, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(os, b, 8);
}

inline void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(os, bits);
}

inline void read_bytes(std::istream& is, void* p, std::size_t n, const std::string& ctx) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw DataError(ctx + ": truncated at byte offset " +
                    std::to_string(static_cast<long long>(is.tellg()) < 0
                                       ? -1
                                       : static_cast<long long>(is.tellg())));
}

inline std::uint32_t read_u32(std::istream& is, const std::string& ctx) {
  unsigned char b[4];
  read_bytes(is, b, 4, ctx);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint64_t read_u64(std::istream& is, const std::string& ctx) {
  unsigned char b[8];
  read_bytes(is, b, 8, ctx);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline double read_f64(std::istream& is, const std::string& ctx) {
  std::uint64_t bits = read_u64(is, ctx);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline std::uint32_t read_u32_be(std::istream& is, const std::string& ctx) {
  unsigned char b[4];
  read_bytes(is, b, 4, ctx);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

inline void expect_magic(std::istream& is, const char (&magic)[5], const std::string& ctx) {
  char got[4];
  read_bytes(is, got, 4, ctx);
  if (std::memcmp(got, magic, 4) != 0)
    throw DataError(ctx + ": bad magic '" + std::string(got, 4) + "', expected '" + magic + "'");
}

}  // namespace pdm::io
