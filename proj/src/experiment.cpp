#include "emomap/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <utility>

#include "emomap/error.hpp"

namespace emomap {

std::string_view to_string(ExperimentMode v) noexcept {
  return v == ExperimentMode::Curated ? "CURATED" : "FIELD";
}

std::string_view to_string(ExperimentState v) noexcept {
  switch (v) {
    case ExperimentState::Draft: return "DRAFT";
    case ExperimentState::Active: return "ACTIVE";
    case ExperimentState::Finished: return "FINISHED";
  }
  return "DRAFT";
}

std::string_view to_string(PictureOrdering v) noexcept {
  return v == PictureOrdering::Fixed ? "FIXED" : "RANDOM_PER_PARTICIPANT";
}

std::string_view to_string(Handedness v) noexcept {
  return v == Handedness::Right ? "RIGHT" : "LEFT";
}

std::string_view to_string(PictureSource v) noexcept {
  return v == PictureSource::Curated ? "CURATED" : "PARTICIPANT";
}

namespace {

std::string normalize(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) out.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(std::string_view s, const std::pair<std::string_view, Enum> (&table)[N]) {
  auto key = normalize(s);
  for (const auto& [name, value] : table)
    if (name == key) return value;
  return std::nullopt;
}

} // namespace

std::optional<ExperimentMode> parse_mode(std::string_view s) {
  static constexpr std::pair<std::string_view, ExperimentMode> table[] = {
      {"CURATED", ExperimentMode::Curated}, {"FIELD", ExperimentMode::Field}};
  return lookup(s, table);
}

std::optional<ExperimentState> parse_state(std::string_view s) {
  static constexpr std::pair<std::string_view, ExperimentState> table[] = {
      {"DRAFT", ExperimentState::Draft},
      {"ACTIVE", ExperimentState::Active},
      {"FINISHED", ExperimentState::Finished}};
  return lookup(s, table);
}

std::optional<PictureOrdering> parse_ordering(std::string_view s) {
  static constexpr std::pair<std::string_view, PictureOrdering> table[] = {
      {"FIXED", PictureOrdering::Fixed},
      {"RANDOM_PER_PARTICIPANT", PictureOrdering::RandomPerParticipant},
      {"RANDOM", PictureOrdering::RandomPerParticipant}};
  return lookup(s, table);
}

std::optional<Handedness> parse_handedness(std::string_view s) {
  static constexpr std::pair<std::string_view, Handedness> table[] = {
      {"RIGHT", Handedness::Right}, {"LEFT", Handedness::Left}};
  return lookup(s, table);
}

std::optional<PictureSource> parse_picture_source(std::string_view s) {
  static constexpr std::pair<std::string_view, PictureSource> table[] = {
      {"CURATED", PictureSource::Curated}, {"PARTICIPANT", PictureSource::Participant}};
  return lookup(s, table);
}

void require_valid_location(const GeoPoint& p) {
  if (!(p.lat >= -90.0 && p.lat <= 90.0) || !(p.lon >= -180.0 && p.lon <= 180.0))
    throw Error(ErrorCode::InvalidLocation, "location must satisfy lat in [-90, 90], lon in [-180, 180]");
}

bool is_active(const Experiment& e, Timestamp now) noexcept {
  return e.state == ExperimentState::Active && now >= e.start_time && now < e.finish_time;
}

bool ExperimentSnapshot::has_picture(std::string_view picture_id) const {
  if (std::find(experiment.picture_ids.begin(), experiment.picture_ids.end(), picture_id) !=
      experiment.picture_ids.end())
    return true;
  return std::any_of(pictures.begin(), pictures.end(),
                     [&](const PictureRecord& p) { return p.picture_id == picture_id; });
}

std::vector<TagEvent> effective_events(std::span<const TagEvent> log) {
  std::map<std::pair<std::string, std::string>, std::size_t> latest;
  for (std::size_t i = 0; i < log.size(); ++i)
    latest[{log[i].participant_id, log[i].picture_id}] = i;

  std::vector<std::size_t> keep;
  keep.reserve(latest.size());
  for (const auto& [key, index] : latest) keep.push_back(index);
  std::sort(keep.begin(), keep.end());

  std::vector<TagEvent> out;
  out.reserve(keep.size());
  for (auto i : keep) out.push_back(log[i]);
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t SplitMix64::next() noexcept {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<std::string> shuffled(std::span<const std::string> items, std::uint64_t seed) {
  std::vector<std::string> out(items.begin(), items.end());
  SplitMix64 rng(seed);
  for (std::size_t i = out.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(rng.next() % i);
    std::swap(out[i - 1], out[j]);
  }
  return out;
}

std::vector<std::string> picture_order(const Experiment& e, std::string_view participant_id) {
  if (e.mode != ExperimentMode::Curated)
    throw Error(ErrorCode::WrongMode, "picture order is defined only for CURATED experiments");
  if (e.ordering == PictureOrdering::Fixed) return e.picture_ids;
  std::string key = e.id;
  key += '|';
  key += participant_id;
  return shuffled(e.picture_ids, fnv1a64(key));
}

bool is_valid_id(std::string_view id) noexcept {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

void require_valid_id(std::string_view id, std::string_view what) {
  if (!is_valid_id(id))
    throw Error(ErrorCode::BadRequest,
                std::string(what) + " must be 1-64 characters of [A-Za-z0-9_-]: '" + std::string(id) + "'");
}

} // namespace emomap
