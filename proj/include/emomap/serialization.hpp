#pragma once

// Structured-text (JSON) forms of the domain types. Entity documents carry a
// "version" field; event records carry exactly the TagEvent fields so each
// fits on one log line.

#include <json.hpp>

#include "emomap/experiment.hpp"
#include "emomap/wheel.hpp"

namespace emomap {

using json = nlohmann::json;

inline constexpr int kDocumentVersion = 1;

json timestamp_json(Timestamp t);
Timestamp timestamp_from_json(const json& j);
std::optional<Timestamp> optional_timestamp_from_json(const json& j);

void to_json(json& j, const TagMap& m);
void from_json(const json& j, TagMap& m);

void to_json(json& j, const Placement& p);
void from_json(const json& j, Placement& p);

void to_json(json& j, const Classification& c);
void from_json(const json& j, Classification& c);

void to_json(json& j, const GeoPoint& g);
void from_json(const json& j, GeoPoint& g);

void to_json(json& j, const Experiment& e);
void from_json(const json& j, Experiment& e);

void to_json(json& j, const Participant& p);
void from_json(const json& j, Participant& p);

void to_json(json& j, const Researcher& r);
void from_json(const json& j, Researcher& r);

void to_json(json& j, const Invitation& i);
void from_json(const json& j, Invitation& i);

void to_json(json& j, const PictureRecord& p);
void from_json(const json& j, PictureRecord& p);

void to_json(json& j, const TagEvent& e);
void from_json(const json& j, TagEvent& e);

/// Participant without credential material, for API responses.
json public_participant_json(const Participant& p);

/// Single-line compact dump. Throws Error(SerializationFailure) on invalid
/// UTF-8.
std::string dump_line(const json& j);

} // namespace emomap
