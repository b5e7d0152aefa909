#include "emomap/image.hpp"

#include <cstdint>

namespace emomap {

namespace {

std::uint32_t read_be32(std::string_view b, std::size_t at) {
  return (std::uint32_t(static_cast<unsigned char>(b[at])) << 24) |
         (std::uint32_t(static_cast<unsigned char>(b[at + 1])) << 16) |
         (std::uint32_t(static_cast<unsigned char>(b[at + 2])) << 8) |
         std::uint32_t(static_cast<unsigned char>(b[at + 3]));
}

bool looks_like_png(std::string_view b) {
  static constexpr std::string_view signature{"\x89PNG\r\n\x1a\n", 8};
  if (b.size() < 8 + 8 + 13 || b.substr(0, 8) != signature) return false;
  if (read_be32(b, 8) != 13 || b.substr(12, 4) != "IHDR") return false;
  return read_be32(b, 16) > 0 && read_be32(b, 20) > 0;
}

bool looks_like_jpeg(std::string_view b) {
  if (b.size() < 6) return false;
  auto u = [&](std::size_t i) { return static_cast<unsigned char>(b[i]); };
  if (u(0) != 0xFF || u(1) != 0xD8 || u(2) != 0xFF) return false;
  // some encoders pad after EOI
  std::size_t end = b.size();
  while (end > 4 && u(end - 1) == 0x00) --end;
  return u(end - 2) == 0xFF && u(end - 1) == 0xD9;
}

} // namespace

std::optional<std::string> sniff_image_media_type(std::string_view bytes) {
  if (looks_like_png(bytes)) return "image/png";
  if (looks_like_jpeg(bytes)) return "image/jpeg";
  return std::nullopt;
}

} // namespace emomap
