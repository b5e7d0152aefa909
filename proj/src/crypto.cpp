#include "emomap/crypto.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include <charconv>
#include <vector>

#include "emomap/error.hpp"

namespace emomap {

namespace {

std::string to_hex(const unsigned char* data, std::size_t n) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(n * 2, '\0');
  for (std::size_t i = 0; i < n; ++i) {
    out[2 * i] = digits[data[i] >> 4];
    out[2 * i + 1] = digits[data[i] & 0xF];
  }
  return out;
}

bool from_hex(std::string_view hex, std::vector<unsigned char>& out) {
  if (hex.size() % 2 != 0) return false;
  out.resize(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto r = std::from_chars(hex.data() + 2 * i, hex.data() + 2 * i + 2, out[i], 16);
    if (r.ec != std::errc{} || r.ptr != hex.data() + 2 * i + 2) return false;
  }
  return true;
}

std::vector<unsigned char> random_bytes(std::size_t n) {
  std::vector<unsigned char> buf(n);
  if (n > 0 && RAND_bytes(buf.data(), static_cast<int>(n)) != 1)
    throw Error(ErrorCode::IoError, "system random source failed");
  return buf;
}

std::vector<unsigned char> pbkdf2(std::string_view password, const std::vector<unsigned char>& salt,
                                  int iterations) {
  std::vector<unsigned char> out(32);
  if (PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()), salt.data(),
                        static_cast<int>(salt.size()), iterations, EVP_sha256(),
                        static_cast<int>(out.size()), out.data()) != 1)
    throw Error(ErrorCode::IoError, "PBKDF2 failed");
  return out;
}

} // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::IoError, "SHA-256 failed");
  return to_hex(digest, len);
}

std::string random_token(std::size_t byte_count) {
  static constexpr char alphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";
  auto bytes = random_bytes(byte_count);
  std::string out;
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += alphabet[(v >> 6) & 63];
    out += alphabet[v & 63];
  }
  std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    unsigned v = bytes[i] << 16;
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
  } else if (rest == 2) {
    unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += alphabet[(v >> 6) & 63];
  }
  return out;
}

std::string random_hex(std::size_t byte_count) {
  auto bytes = random_bytes(byte_count);
  return to_hex(bytes.data(), bytes.size());
}

std::string hash_password(std::string_view password, int iterations) {
  auto salt = random_bytes(16);
  auto digest = pbkdf2(password, salt, iterations);
  return "pbkdf2-sha256$" + std::to_string(iterations) + "$" + to_hex(salt.data(), salt.size()) +
         "$" + to_hex(digest.data(), digest.size());
}

bool verify_password(std::string_view password, std::string_view encoded) {
  constexpr std::string_view scheme = "pbkdf2-sha256$";
  if (encoded.substr(0, scheme.size()) != scheme) return false;
  encoded.remove_prefix(scheme.size());

  auto d1 = encoded.find('$');
  if (d1 == std::string_view::npos) return false;
  auto d2 = encoded.find('$', d1 + 1);
  if (d2 == std::string_view::npos) return false;

  int iterations = 0;
  auto it = encoded.substr(0, d1);
  if (std::from_chars(it.data(), it.data() + it.size(), iterations).ec != std::errc{} ||
      iterations < 1)
    return false;

  std::vector<unsigned char> salt, expected;
  if (!from_hex(encoded.substr(d1 + 1, d2 - d1 - 1), salt) ||
      !from_hex(encoded.substr(d2 + 1), expected) || expected.size() != 32)
    return false;

  auto actual = pbkdf2(password, salt, iterations);
  return CRYPTO_memcmp(actual.data(), expected.data(), expected.size()) == 0;
}

} // namespace emomap
