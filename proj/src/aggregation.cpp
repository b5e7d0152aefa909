#include "emomap/aggregation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>

#include "emomap/error.hpp"

namespace emomap {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

} // namespace

CircularSummary empty_summary(const TagMap& map) {
  CircularSummary s;
  s.sector_histogram.assign(static_cast<std::size_t>(map.sector_count), 0);
  return s;
}

CircularSummary summarize(std::span<const TagEvent> events, const TagMap& map) {
  if (events.empty()) throw Error(ErrorCode::EmptyInput, "cannot summarize zero events");

  CircularSummary s = empty_summary(map);
  s.n = events.size();
  double sx = 0.0, sy = 0.0, radius_sum = 0.0;
  for (const auto& e : events) {
    double a = e.classification.angle_deg * kDegToRad;
    sx += std::sin(a);
    sy += std::cos(a);
    radius_sum += e.classification.radius;
    auto sector = e.classification.sector_index;
    if (sector >= 0 && sector < map.sector_count) ++s.sector_histogram[static_cast<std::size_t>(sector)];
  }
  const double n = static_cast<double>(s.n);
  s.resultant_length = std::clamp(std::hypot(sx, sy) / n, 0.0, 1.0);
  s.mean_radius = radius_sum / n;
  if (s.resultant_length >= kDegenerateResultant) {
    s.mean_angle_deg = clockwise_angle_deg(sx, sy);
    s.dominant_sector = sector_of_angle(map, *s.mean_angle_deg);
  }
  return s;
}

json summary_json(const CircularSummary& s) {
  return json{{"n", s.n},
              {"mean_angle_deg", s.mean_angle_deg ? json(*s.mean_angle_deg) : json(nullptr)},
              {"resultant_length", s.resultant_length},
              {"dominant_sector", s.dominant_sector ? json(*s.dominant_sector) : json(nullptr)},
              {"sector_histogram", s.sector_histogram},
              {"mean_radius", s.mean_radius}};
}

EmotionMap grid_aggregate(std::span<const TagEvent> events, const TagMap& map, double cell_size_deg) {
  if (!(cell_size_deg > 0.0 && cell_size_deg <= 10.0))
    throw Error(ErrorCode::InvalidCellSize, "cell size must lie in (0, 10] degrees");

  EmotionMap out;
  out.cell_size_deg = cell_size_deg;
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<TagEvent>> buckets;
  for (const auto& e : events) {
    if (!e.location) {
      ++out.skipped;
      continue;
    }
    ++out.located;
    auto lat_index = static_cast<std::int64_t>(std::floor(e.location->lat / cell_size_deg));
    auto lon_index = static_cast<std::int64_t>(std::floor(e.location->lon / cell_size_deg));
    buckets[{lat_index, lon_index}].push_back(e);
  }
  out.cells.reserve(buckets.size());
  for (const auto& [key, bucket] : buckets)
    out.cells.push_back({key.first, key.second, cell_size_deg, summarize(bucket, map)});
  return out;
}

std::string emotion_map_document(const EmotionMap& m) {
  json cells = json::array();
  for (const auto& c : m.cells) {
    cells.push_back(json{
        {"cell_lat_index", c.cell_lat_index},
        {"cell_lon_index", c.cell_lon_index},
        {"cell_size_deg", c.cell_size_deg},
        {"n", c.summary.n},
        {"mean_angle_deg", c.summary.mean_angle_deg ? json(*c.summary.mean_angle_deg) : json(nullptr)},
        {"resultant_length", c.summary.resultant_length},
        {"dominant_sector", c.summary.dominant_sector ? json(*c.summary.dominant_sector) : json(nullptr)},
        {"sector_histogram", c.summary.sector_histogram}});
  }
  json doc = {{"cell_size_deg", m.cell_size_deg},
              {"located", m.located},
              {"skipped", m.skipped},
              {"cells", std::move(cells)}};
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

std::vector<UserViewEntry> per_user_view(const ExperimentSnapshot& snap, std::string_view participant_id) {
  if (!snap.experiment.participant_ids.contains(std::string(participant_id)))
    throw Error(ErrorCode::UnknownParticipant,
                "participant '" + std::string(participant_id) + "' is not enrolled in this experiment");
  std::vector<UserViewEntry> out;
  for (const auto& e : snap.effective)
    if (e.participant_id == participant_id)
      out.push_back({e.picture_id, e.placement, e.classification, e.tagged_at});
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.tagged_at < b.tagged_at; });
  return out;
}

PictureView per_picture_view(const ExperimentSnapshot& snap, std::string_view picture_id) {
  if (!snap.has_picture(picture_id))
    throw Error(ErrorCode::UnknownPicture,
                "picture '" + std::string(picture_id) + "' does not belong to this experiment");
  std::vector<TagEvent> events;
  PictureView view;
  for (const auto& e : snap.effective) {
    if (e.picture_id != picture_id) continue;
    events.push_back(e);
    view.placements.emplace_back(e.participant_id, e.placement);
  }
  view.summary = events.empty() ? empty_summary(snap.tag_map) : summarize(events, snap.tag_map);
  return view;
}

json user_view_json(const std::vector<UserViewEntry>& view) {
  json entries = json::array();
  for (const auto& e : view)
    entries.push_back(json{{"picture_id", e.picture_id},
                           {"placement", e.placement},
                           {"classification", e.classification},
                           {"tagged_at", timestamp_json(e.tagged_at)}});
  return json{{"entries", std::move(entries)}};
}

json picture_view_json(const PictureView& view) {
  json placements = json::array();
  for (const auto& [pid, p] : view.placements)
    placements.push_back(json{{"participant_id", pid}, {"placement", p}});
  return json{{"summary", summary_json(view.summary)}, {"placements", std::move(placements)}};
}

// ---------------------------------------------------------------------------

std::string format_fixed6(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
  std::string s(buf, r.ptr);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::vector<CsvRow> csv_rows(const ExperimentSnapshot& snap) {
  std::vector<CsvRow> rows;
  rows.reserve(snap.effective.size());
  for (const auto& e : snap.effective) {
    rows.push_back(CsvRow{e.experiment_id, e.participant_id, e.picture_id,
                          std::string(to_string(e.picture_source)), e.tagged_at, e.placement.x,
                          e.placement.y, e.classification.angle_deg, e.classification.radius,
                          e.classification.sector_index, e.classification.band_index,
                          e.classification.label, e.location});
  }
  return rows;
}

namespace {

void append_field(std::string& out, std::string_view field) {
  bool quote = field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!quote) {
    out += field;
    return;
  }
  out += '"';
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

} // namespace

std::string export_csv(std::span<const CsvRow> rows) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : rows) {
    append_field(out, r.experiment_id);
    out += ',';
    append_field(out, r.participant_id);
    out += ',';
    append_field(out, r.picture_id);
    out += ',';
    append_field(out, r.picture_source);
    out += ',';
    out += format_iso8601(r.tagged_at);
    out += ',';
    out += format_fixed6(r.x);
    out += ',';
    out += format_fixed6(r.y);
    out += ',';
    out += format_fixed6(r.angle_deg);
    out += ',';
    out += format_fixed6(r.radius);
    out += ',';
    out += std::to_string(r.sector_index);
    out += ',';
    out += std::to_string(r.band_index);
    out += ',';
    append_field(out, r.label);
    out += ',';
    if (r.location) {
      out += format_fixed6(r.location->lat);
      out += ',';
      out += format_fixed6(r.location->lon);
    } else {
      out += ',';
    }
    out += '\n';
  }
  return out;
}

std::string export_csv(const ExperimentSnapshot& snap) {
  auto rows = csv_rows(snap);
  return export_csv(rows);
}

namespace {

// RFC 4180 records; quoted fields may contain separators and newlines.
std::vector<std::vector<std::string>> split_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) throw Error(ErrorCode::BadRequest, "stray quote inside unquoted CSV field");
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\n':
        fields.push_back(std::move(field));
        field.clear();
        records.push_back(std::move(fields));
        fields.clear();
        field_started = false;
        break;
      case '\r':
        throw Error(ErrorCode::BadRequest, "CSV must use LF line endings");
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorCode::BadRequest, "unterminated quoted CSV field");
  if (field_started || !field.empty()) {
    fields.push_back(std::move(field));
    records.push_back(std::move(fields));
  }
  return records;
}

double parse_double(const std::string& s, std::size_t row) {
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw Error(ErrorCode::BadRequest, "row " + std::to_string(row) + ": invalid number '" + s + "'");
  return v;
}

int parse_int(const std::string& s, std::size_t row) {
  int v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw Error(ErrorCode::BadRequest, "row " + std::to_string(row) + ": invalid integer '" + s + "'");
  return v;
}

} // namespace

std::vector<CsvRow> parse_csv(std::string_view text) {
  auto records = split_records(text);
  if (records.empty()) throw Error(ErrorCode::BadRequest, "CSV is empty");

  std::string header;
  for (std::size_t i = 0; i < records[0].size(); ++i) {
    if (i) header += ',';
    header += records[0][i];
  }
  if (header != kCsvHeader) throw Error(ErrorCode::BadRequest, "unexpected CSV header");

  std::vector<CsvRow> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    auto& f = records[i];
    if (f.size() != 14)
      throw Error(ErrorCode::BadRequest, "row " + std::to_string(i) + ": expected 14 fields");
    CsvRow r;
    r.experiment_id = std::move(f[0]);
    r.participant_id = std::move(f[1]);
    r.picture_id = std::move(f[2]);
    r.picture_source = std::move(f[3]);
    auto t = parse_iso8601(f[4]);
    if (!t) throw Error(ErrorCode::BadRequest, "row " + std::to_string(i) + ": invalid tagged_at");
    r.tagged_at = *t;
    r.x = parse_double(f[5], i);
    r.y = parse_double(f[6], i);
    r.angle_deg = parse_double(f[7], i);
    r.radius = parse_double(f[8], i);
    r.sector_index = parse_int(f[9], i);
    r.band_index = parse_int(f[10], i);
    r.label = std::move(f[11]);
    if (f[12].empty() != f[13].empty())
      throw Error(ErrorCode::BadRequest, "row " + std::to_string(i) + ": lat and lon must both be present or absent");
    if (!f[12].empty()) r.location = GeoPoint{parse_double(f[12], i), parse_double(f[13], i)};
    rows.push_back(std::move(r));
  }
  return rows;
}

} // namespace emomap
