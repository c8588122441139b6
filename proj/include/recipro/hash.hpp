#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "recipro/error.hpp"

namespace recipro {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

// FNV-1a, 64-bit.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = kFnvOffsetBasis) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Incremental content digest. Fields are length-prefixed so that
// ("ab","c") and ("a","bc") hash differently.
class Digest {
 public:
  Digest& add(std::string_view field) {
    const std::uint64_t n = field.size();
    for (int i = 0; i < 8; ++i) {
      const char byte = static_cast<char>((n >> (8 * i)) & 0xff);
      h_ = fnv1a64(std::string_view(&byte, 1), h_);
    }
    h_ = fnv1a64(field, h_);
    return *this;
  }
  Digest& add(std::uint64_t v) { return add(std::to_string(v)); }
  std::string hex() const { return hex64(h_); }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = kFnvOffsetBasis;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("unreadable_file", path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline std::string file_digest(const std::string& path) {
  return hex64(fnv1a64(read_file(path)));
}

}  // namespace recipro
