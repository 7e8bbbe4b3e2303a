#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace capeval {

/// Lowercase hex SHA-256 of `bytes`. Throws kInvalidInput on empty input.
std::string digest_bytes(std::span<const std::uint8_t> bytes);
std::string digest_bytes(std::string_view bytes);

/// Same as digest_bytes but accepts empty input (used for hashing
/// arbitrary strings such as raw model responses).
std::string digest_any(std::string_view bytes);

std::string base64_encode(std::string_view bytes);

}  // namespace capeval
