#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace faasguard {

// Self-contained SHA-256. Used for artifact digests, container image digests
// and, via the HMAC construction below, keyed authentication tags.
std::array<std::uint8_t, 32> sha256(std::string_view data);

std::string sha256_hex(std::string_view data);

// HMAC-SHA256, hex-encoded.
std::string hmac_sha256_hex(std::string_view key, std::string_view message);

std::string to_hex(const std::uint8_t* data, std::size_t len);

}  // namespace faasguard
