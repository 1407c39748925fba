#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "common/error.hpp"

namespace lidarsphere::binio {

static_assert(std::endian::native == std::endian::little,
              "container formats are little-endian; big-endian hosts need byte swapping");

template <typename T>
  requires std::is_trivially_copyable_v<T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
  requires std::is_trivially_copyable_v<T>
T get(std::istream& in, const std::string& what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw DataError("truncated stream while reading " + what);
  return value;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, const std::string& what) {
  const auto n = get<std::uint32_t>(in, what + " length");
  if (n > (1u << 20)) throw DataError("implausible string length in " + what);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw DataError("truncated stream while reading " + what);
  return s;
}

inline void expect_magic(std::istream& in, const char (&magic)[5], const std::string& path) {
  char buf[4] = {};
  in.read(buf, 4);
  if (!in || std::memcmp(buf, magic, 4) != 0)
    throw DataError(path + ": bad magic, expected \"" + std::string(magic, 4) + "\"");
}

}  // namespace lidarsphere::binio
