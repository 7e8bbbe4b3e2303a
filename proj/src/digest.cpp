#include "capeval/digest.hpp"

#include <array>

#include <openssl/evp.h>
#include <openssl/sha.h>

#include "capeval/error.hpp"

namespace capeval {
namespace {

std::string to_hex(const unsigned char* data, std::size_t n) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(n * 2, '\0');
  for (std::size_t i = 0; i < n; ++i) {
    out[2 * i] = kHex[data[i] >> 4];
    out[2 * i + 1] = kHex[data[i] & 0x0f];
  }
  return out;
}

std::string sha256_hex(const void* data, std::size_t n) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> md{};
  unsigned int len = 0;
  if (EVP_Digest(data, n, md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kIo, "EVP_Digest failed");
  }
  return to_hex(md.data(), len);
}

}  // namespace

std::string digest_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw Error(ErrorKind::kInvalidInput, "cannot digest empty input");
  return sha256_hex(bytes.data(), bytes.size());
}

std::string digest_bytes(std::string_view bytes) {
  if (bytes.empty()) throw Error(ErrorKind::kInvalidInput, "cannot digest empty input");
  return sha256_hex(bytes.data(), bytes.size());
}

std::string digest_any(std::string_view bytes) { return sha256_hex(bytes.data(), bytes.size()); }

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

}  // namespace capeval
