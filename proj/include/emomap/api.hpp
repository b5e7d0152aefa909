#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emomap/platform.hpp"

namespace emomap {

/// Locale for label display. Precedence: explicit locale parameter, then
/// Accept-Language (by q-value, exact tag then primary subtag), then the
/// experiment default. nullopt means the tag map's default labels.
std::optional<std::string> negotiate_locale(const TagMap& map, std::optional<std::string_view> explicit_locale,
                                            std::string_view accept_language,
                                            std::string_view experiment_default);

/// HTTP/1.1 JSON API over a Platform. Researchers authenticate with
/// POST /api/login; participants with POST /api/session. Both receive
/// bearer tokens for the Authorization header.
class ApiServer {
public:
  explicit ApiServer(Platform& platform);
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Serves files under `dir` at `/`, for the browser UI bundle.
  void mount_static(const std::string& dir);

  /// Binds the listening socket. Port 0 picks a free port. Returns the bound
  /// port; throws Error(IoError) if the address is unavailable.
  int bind(const std::string& host, int port);

  /// Serves until stop(). Requires bind().
  void listen();
  void stop();
  bool is_running() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace emomap
