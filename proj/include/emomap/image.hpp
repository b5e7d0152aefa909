#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace emomap {

inline constexpr std::size_t kDefaultMaxImageBytes = 20u * 1024u * 1024u;

// Structural check of the container framing: PNG signature followed by an
// IHDR chunk with non-zero dimensions, or a JPEG SOI marker followed by a
// marker segment and a trailing EOI. Returns "image/png" / "image/jpeg".
std::optional<std::string> sniff_image_media_type(std::string_view bytes);

} // namespace emomap
