#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace emomap {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;
using Clock = std::function<Timestamp()>;

Timestamp system_now();

// "YYYY-MM-DDTHH:MM:SS.mmmZ", always UTC with millisecond precision.
std::string format_iso8601(Timestamp t);

// Accepts "YYYY-MM-DDTHH:MM:SS[.f+](Z|±HH:MM)". Sub-millisecond digits are
// truncated. Returns nullopt on any syntax or range error.
std::optional<Timestamp> parse_iso8601(std::string_view text);

} // namespace emomap
