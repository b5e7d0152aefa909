#include "emomap/serialization.hpp"

#include "emomap/error.hpp"

namespace emomap {

namespace {

template <typename Enum>
Enum parse_enum(const json& j, std::optional<Enum> (*parse)(std::string_view), const char* what) {
  auto v = parse(j.get<std::string>());
  if (!v) throw json::other_error::create(501, std::string("invalid ") + what, &j);
  return *v;
}

json optional_timestamp_json(const std::optional<Timestamp>& t) {
  return t ? timestamp_json(*t) : json(nullptr);
}

} // namespace

json timestamp_json(Timestamp t) { return format_iso8601(t); }

Timestamp timestamp_from_json(const json& j) {
  auto t = parse_iso8601(j.get<std::string>());
  if (!t) throw json::other_error::create(501, "invalid ISO-8601 timestamp", &j);
  return *t;
}

std::optional<Timestamp> optional_timestamp_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return timestamp_from_json(j);
}

void to_json(json& j, const TagMap& m) {
  j = json{{"version", kDocumentVersion},
           {"id", m.id},
           {"sector_count", m.sector_count},
           {"sector_offset_deg", m.sector_offset_deg},
           {"band_boundaries", m.band_boundaries},
           {"labels", m.labels},
           {"locale_labels", m.locale_labels}};
}

void from_json(const json& j, TagMap& m) {
  j.at("id").get_to(m.id);
  j.at("sector_count").get_to(m.sector_count);
  m.sector_offset_deg = j.value("sector_offset_deg", 0.0);
  j.at("band_boundaries").get_to(m.band_boundaries);
  j.at("labels").get_to(m.labels);
  m.locale_labels.clear();
  if (j.contains("locale_labels")) j.at("locale_labels").get_to(m.locale_labels);
}

void to_json(json& j, const Placement& p) { j = json{{"x", p.x}, {"y", p.y}}; }

void from_json(const json& j, Placement& p) {
  j.at("x").get_to(p.x);
  j.at("y").get_to(p.y);
}

void to_json(json& j, const Classification& c) {
  j = json{{"sector_index", c.sector_index},
           {"band_index", c.band_index},
           {"label", c.label},
           {"angle_deg", c.angle_deg},
           {"radius", c.radius}};
}

void from_json(const json& j, Classification& c) {
  j.at("sector_index").get_to(c.sector_index);
  j.at("band_index").get_to(c.band_index);
  j.at("label").get_to(c.label);
  j.at("angle_deg").get_to(c.angle_deg);
  j.at("radius").get_to(c.radius);
}

void to_json(json& j, const GeoPoint& g) { j = json{{"lat", g.lat}, {"lon", g.lon}}; }

void from_json(const json& j, GeoPoint& g) {
  j.at("lat").get_to(g.lat);
  j.at("lon").get_to(g.lon);
}

void to_json(json& j, const Experiment& e) {
  j = json{{"version", kDocumentVersion},
           {"id", e.id},
           {"mode", to_string(e.mode)},
           {"state", to_string(e.state)},
           {"start_time", timestamp_json(e.start_time)},
           {"finish_time", timestamp_json(e.finish_time)},
           {"tag_map_id", e.tag_map_id},
           {"picture_ids", e.picture_ids},
           {"ordering", to_string(e.ordering)},
           {"participant_ids", e.participant_ids},
           {"locale_default", e.locale_default}};
}

void from_json(const json& j, Experiment& e) {
  j.at("id").get_to(e.id);
  e.mode = parse_enum(j.at("mode"), parse_mode, "mode");
  e.state = parse_enum(j.at("state"), parse_state, "state");
  e.start_time = timestamp_from_json(j.at("start_time"));
  e.finish_time = timestamp_from_json(j.at("finish_time"));
  j.at("tag_map_id").get_to(e.tag_map_id);
  j.at("picture_ids").get_to(e.picture_ids);
  e.ordering = parse_enum(j.at("ordering"), parse_ordering, "ordering");
  j.at("participant_ids").get_to(e.participant_ids);
  e.locale_default = j.value("locale_default", std::string("en"));
}

void to_json(json& j, const Participant& p) {
  j = json{{"version", kDocumentVersion},
           {"id", p.id},
           {"display_name", p.display_name},
           {"credentials", nullptr},
           {"handedness", to_string(p.handedness)}};
  if (p.credentials)
    j["credentials"] = json{{"username", p.credentials->username},
                            {"password_hash", p.credentials->password_hash}};
}

void from_json(const json& j, Participant& p) {
  j.at("id").get_to(p.id);
  p.display_name = j.value("display_name", p.id);
  p.credentials.reset();
  if (j.contains("credentials") && !j.at("credentials").is_null()) {
    const auto& c = j.at("credentials");
    p.credentials = Credentials{c.at("username").get<std::string>(),
                                c.at("password_hash").get<std::string>()};
  }
  p.handedness = j.contains("handedness") ? parse_enum(j.at("handedness"), parse_handedness, "handedness")
                                          : Handedness::Right;
}

json public_participant_json(const Participant& p) {
  json j = {{"id", p.id},
            {"display_name", p.display_name},
            {"handedness", to_string(p.handedness)},
            {"username", nullptr}};
  if (p.credentials) j["username"] = p.credentials->username;
  return j;
}

void to_json(json& j, const Researcher& r) {
  j = json{{"version", kDocumentVersion}, {"username", r.username}, {"password_hash", r.password_hash}};
}

void from_json(const json& j, Researcher& r) {
  j.at("username").get_to(r.username);
  j.at("password_hash").get_to(r.password_hash);
}

void to_json(json& j, const Invitation& i) {
  j = json{{"version", kDocumentVersion},
           {"token", i.token},
           {"experiment_id", i.experiment_id},
           {"participant_id", i.participant_id},
           {"url_payload", i.url_payload},
           {"expires_at", optional_timestamp_json(i.expires_at)},
           {"created_at", timestamp_json(i.created_at)}};
}

void from_json(const json& j, Invitation& i) {
  j.at("token").get_to(i.token);
  j.at("experiment_id").get_to(i.experiment_id);
  j.at("participant_id").get_to(i.participant_id);
  j.at("url_payload").get_to(i.url_payload);
  i.expires_at = optional_timestamp_from_json(j.value("expires_at", json(nullptr)));
  i.created_at = timestamp_from_json(j.at("created_at"));
}

void to_json(json& j, const PictureRecord& p) {
  j = json{{"version", kDocumentVersion},
           {"picture_id", p.picture_id},
           {"experiment_id", p.experiment_id},
           {"blob_id", p.blob_id},
           {"media_type", p.media_type},
           {"source", to_string(p.source)},
           {"uploader_id", p.uploader_id ? json(*p.uploader_id) : json(nullptr)},
           {"location", p.location ? json(*p.location) : json(nullptr)},
           {"uploaded_at", timestamp_json(p.uploaded_at)},
           {"client_time", optional_timestamp_json(p.client_time)}};
}

void from_json(const json& j, PictureRecord& p) {
  j.at("picture_id").get_to(p.picture_id);
  j.at("experiment_id").get_to(p.experiment_id);
  j.at("blob_id").get_to(p.blob_id);
  j.at("media_type").get_to(p.media_type);
  p.source = parse_enum(j.at("source"), parse_picture_source, "source");
  p.uploader_id.reset();
  if (j.contains("uploader_id") && !j.at("uploader_id").is_null())
    p.uploader_id = j.at("uploader_id").get<std::string>();
  p.location.reset();
  if (j.contains("location") && !j.at("location").is_null())
    p.location = j.at("location").get<GeoPoint>();
  p.uploaded_at = timestamp_from_json(j.at("uploaded_at"));
  p.client_time = optional_timestamp_from_json(j.value("client_time", json(nullptr)));
}

void to_json(json& j, const TagEvent& e) {
  j = json{{"event_id", e.event_id},
           {"experiment_id", e.experiment_id},
           {"participant_id", e.participant_id},
           {"picture_id", e.picture_id},
           {"placement", e.placement},
           {"classification", e.classification},
           {"tagged_at", timestamp_json(e.tagged_at)},
           {"client_time", optional_timestamp_json(e.client_time)},
           {"picture_source", to_string(e.picture_source)}};
  if (e.location) j["location"] = *e.location;
}

void from_json(const json& j, TagEvent& e) {
  j.at("event_id").get_to(e.event_id);
  j.at("experiment_id").get_to(e.experiment_id);
  j.at("participant_id").get_to(e.participant_id);
  j.at("picture_id").get_to(e.picture_id);
  j.at("placement").get_to(e.placement);
  j.at("classification").get_to(e.classification);
  e.tagged_at = timestamp_from_json(j.at("tagged_at"));
  e.client_time = optional_timestamp_from_json(j.value("client_time", json(nullptr)));
  e.location.reset();
  if (j.contains("location") && !j.at("location").is_null()) e.location = j.at("location").get<GeoPoint>();
  e.picture_source = parse_enum(j.at("picture_source"), parse_picture_source, "picture_source");
}

std::string dump_line(const json& j) {
  try {
    return j.dump(-1, ' ', false, json::error_handler_t::strict);
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::SerializationFailure, ex.what());
  }
}

} // namespace emomap
