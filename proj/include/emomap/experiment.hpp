#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emomap/time.hpp"
#include "emomap/wheel.hpp"

namespace emomap {

enum class ExperimentMode { Curated, Field };
enum class ExperimentState { Draft, Active, Finished };
enum class PictureOrdering { Fixed, RandomPerParticipant };
enum class Handedness { Right, Left };
enum class PictureSource { Curated, Participant };

std::string_view to_string(ExperimentMode v) noexcept;
std::string_view to_string(ExperimentState v) noexcept;
std::string_view to_string(PictureOrdering v) noexcept;
std::string_view to_string(Handedness v) noexcept;
std::string_view to_string(PictureSource v) noexcept;

// Case-insensitive; '-' and '_' are interchangeable.
std::optional<ExperimentMode> parse_mode(std::string_view s);
std::optional<ExperimentState> parse_state(std::string_view s);
std::optional<PictureOrdering> parse_ordering(std::string_view s);
std::optional<Handedness> parse_handedness(std::string_view s);
std::optional<PictureSource> parse_picture_source(std::string_view s);

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Throws Error(InvalidLocation) outside [-90, 90] x [-180, 180].
void require_valid_location(const GeoPoint& p);

struct Experiment {
  std::string id;
  ExperimentMode mode = ExperimentMode::Curated;
  ExperimentState state = ExperimentState::Draft;
  Timestamp start_time{};
  Timestamp finish_time{};
  std::string tag_map_id;
  std::vector<std::string> picture_ids;
  PictureOrdering ordering = PictureOrdering::Fixed;
  std::set<std::string> participant_ids;
  std::string locale_default = "en";

  friend bool operator==(const Experiment&, const Experiment&) = default;
};

/// Accepting tags requires the ACTIVE flag and a clock inside [start, finish).
bool is_active(const Experiment& e, Timestamp now) noexcept;

struct ExperimentDraft {
  std::optional<std::string> id;
  ExperimentMode mode = ExperimentMode::Curated;
  Timestamp start_time{};
  Timestamp finish_time{};
  std::string tag_map_id = std::string(kPlutchikId);
  std::vector<std::string> picture_ids;
  PictureOrdering ordering = PictureOrdering::Fixed;
  std::set<std::string> participant_ids;
  std::string locale_default = "en";
};

/// Fields left empty are untouched. `mode` exists only so that an attempt to
/// change it can be rejected.
struct ExperimentPatch {
  std::optional<ExperimentMode> mode;
  std::optional<Timestamp> start_time;
  std::optional<Timestamp> finish_time;
  std::optional<std::vector<std::string>> picture_ids;
  std::optional<PictureOrdering> ordering;
  std::optional<std::set<std::string>> participant_ids;
  std::vector<std::string> add_participant_ids;
  std::optional<std::string> locale_default;
};

struct Credentials {
  std::string username;
  std::string password_hash; // see crypto.hpp
  friend bool operator==(const Credentials&, const Credentials&) = default;
};

struct Participant {
  std::string id;
  std::string display_name;
  std::optional<Credentials> credentials;
  Handedness handedness = Handedness::Right;
  friend bool operator==(const Participant&, const Participant&) = default;
};

struct Researcher {
  std::string username;
  std::string password_hash;
  friend bool operator==(const Researcher&, const Researcher&) = default;
};

struct Invitation {
  std::string token;
  std::string experiment_id;
  std::string participant_id;
  std::string url_payload; // also the QR payload
  std::optional<Timestamp> expires_at;
  Timestamp created_at{};
  friend bool operator==(const Invitation&, const Invitation&) = default;
};

struct Session {
  std::string token;
  std::string participant_id;
  std::string experiment_id;
  std::size_t cursor = 0;
  Timestamp created_at{};
};

struct PictureRecord {
  std::string picture_id;
  std::string experiment_id;
  std::string blob_id; // sha256 hex
  std::string media_type;
  PictureSource source = PictureSource::Curated;
  std::optional<std::string> uploader_id; // participant, FIELD uploads only
  std::optional<GeoPoint> location;
  Timestamp uploaded_at{};
  std::optional<Timestamp> client_time;
  friend bool operator==(const PictureRecord&, const PictureRecord&) = default;
};

struct TagEvent {
  std::string event_id;
  std::string experiment_id;
  std::string participant_id;
  std::string picture_id;
  Placement placement;
  Classification classification;
  Timestamp tagged_at{}; // server clock
  std::optional<Timestamp> client_time;
  std::optional<GeoPoint> location;
  PictureSource picture_source = PictureSource::Curated;
  friend bool operator==(const TagEvent&, const TagEvent&) = default;
};

/// Consistent read view of one experiment.
struct ExperimentSnapshot {
  Experiment experiment;
  TagMap tag_map;
  std::vector<TagEvent> log;       // full history, append order
  std::vector<TagEvent> effective; // latest-wins
  std::vector<PictureRecord> pictures;

  bool has_picture(std::string_view picture_id) const;
};

/// Latest-wins resolution over an append-only log: one event per
/// (participant, picture), the last one appended. Result order follows the
/// log position of each surviving event.
std::vector<TagEvent> effective_events(std::span<const TagEvent> log);

// ---------------------------------------------------------------------------
// Deterministic per-participant ordering
// ---------------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
  std::uint64_t next() noexcept;

private:
  std::uint64_t state_;
};

/// Fisher-Yates from the back: for i = n-1 .. 1, swap(i, next() % (i + 1)).
std::vector<std::string> shuffled(std::span<const std::string> items, std::uint64_t seed);

/// FIXED: configured order. RANDOM_PER_PARTICIPANT: shuffle seeded with
/// fnv1a64("<experiment_id>|<participant_id>"). Throws WrongMode for FIELD.
std::vector<std::string> picture_order(const Experiment& e, std::string_view participant_id);

/// Ids become file names and URL path segments: 1-64 of [A-Za-z0-9_-].
bool is_valid_id(std::string_view id) noexcept;
void require_valid_id(std::string_view id, std::string_view what);

} // namespace emomap
