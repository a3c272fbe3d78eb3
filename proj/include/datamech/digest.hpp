#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace datamech {

inline constexpr std::size_t kDigestHexLength = 64;

// 64 zero hex characters; the genesis link of the audit chain.
inline const std::string kZeroDigest(kDigestHexLength, '0');

// SHA-256 of the input, lowercase hex.
inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> raw{};
  unsigned int raw_len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr ||
      EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, raw.data(), &raw_len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256: digest computation failed");
  }
  EVP_MD_CTX_free(ctx);

  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * raw_len);
  for (unsigned int i = 0; i < raw_len; ++i) {
    out.push_back(hex[raw[i] >> 4]);
    out.push_back(hex[raw[i] & 0x0f]);
  }
  return out;
}

// FNV-1a, used for feature hashing (not a cryptographic digest).
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace datamech
