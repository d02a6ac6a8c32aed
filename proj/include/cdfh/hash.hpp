#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace cdfh {

/// 64-bit FNV-1a, hex encoded. Stable across platforms; used for config hashes.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cdfh
