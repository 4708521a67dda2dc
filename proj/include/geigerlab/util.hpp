#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>

namespace geigerlab {

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// 64-bit FNV-1a; stable across platforms, used for config provenance hashes.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Smallest n with n * quantum >= seconds.
inline std::uint64_t ticks_at_least(double seconds, double quantum) {
  if (!(seconds > 0))
    return 0;
  auto n = static_cast<std::uint64_t>(seconds / quantum);
  while (n > 0 && static_cast<double>(n - 1) * quantum >= seconds)
    --n;
  while (static_cast<double>(n) * quantum < seconds)
    ++n;
  return n;
}

} // namespace geigerlab
