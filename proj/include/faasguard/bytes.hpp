#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace faasguard {

// Big-endian writers for canonical serializations. Canonical byte streams
// feed the digest, so the encoding must be fixed across platforms.

inline void append_be_u32(std::string& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(char(v >> (8 * i)));
}

inline void append_be_u64(std::string& out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) out.push_back(char(v >> (8 * i)));
}

inline void append_be_i64(std::string& out, std::int64_t v) {
  append_be_u64(out, static_cast<std::uint64_t>(v));
}

// IEEE-754 bit pattern, big-endian.
inline void append_be_double(std::string& out, double v) {
  append_be_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline void append_lp_string(std::string& out, std::string_view s) {
  append_be_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

}  // namespace faasguard
