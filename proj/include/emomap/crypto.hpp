#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace emomap {

std::string sha256_hex(std::string_view bytes);

/// `byte_count` bytes from the OS CSPRNG, base64url-encoded without padding
/// (16 bytes -> 22 characters).
std::string random_token(std::size_t byte_count = 16);

std::string random_hex(std::size_t byte_count);

inline constexpr int kDefaultPbkdf2Iterations = 120000;

/// "pbkdf2-sha256$<iterations>$<salt hex>$<digest hex>"
std::string hash_password(std::string_view password, int iterations = kDefaultPbkdf2Iterations);

bool verify_password(std::string_view password, std::string_view encoded);

} // namespace emomap
