#pragma once

// Read-side analysis over experiment snapshots: circular statistics of wheel
// placements, latitude/longitude grid binning for emotion maps, result views
// for the admin panel, and the CSV export format.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emomap/experiment.hpp"
#include "emomap/serialization.hpp"

namespace emomap {

/// Resultant lengths below this have no meaningful mean direction.
inline constexpr double kDegenerateResultant = 1e-9;

struct CircularSummary {
  std::size_t n = 0;
  std::optional<double> mean_angle_deg; // clockwise from top, [0, 360)
  double resultant_length = 0.0;        // [0, 1]
  std::optional<int> dominant_sector;
  std::vector<std::size_t> sector_histogram;
  double mean_radius = 0.0;
};

/// Mean of the unit vectors at each event's classified angle. Placement
/// radius is reported separately as mean_radius and never weights the
/// direction. Throws Error(EmptyInput) for an empty list.
CircularSummary summarize(std::span<const TagEvent> events, const TagMap& map);

/// The n = 0 summary: undefined mean, zeroed histogram.
CircularSummary empty_summary(const TagMap& map);

json summary_json(const CircularSummary& s);

struct EmotionMapCell {
  std::int64_t cell_lat_index = 0; // floor(lat / cell_size_deg)
  std::int64_t cell_lon_index = 0; // floor(lon / cell_size_deg)
  double cell_size_deg = 0.0;
  CircularSummary summary;
};

struct EmotionMap {
  double cell_size_deg = 0.0;
  std::size_t located = 0;
  std::size_t skipped = 0; // events without a location
  std::vector<EmotionMapCell> cells; // sorted by (lat index, lon index)
};

/// Throws Error(InvalidCellSize) unless 0 < cell_size_deg <= 10.
EmotionMap grid_aggregate(std::span<const TagEvent> events, const TagMap& map, double cell_size_deg);

/// The map document served by the API and written by the CLI.
std::string emotion_map_document(const EmotionMap& m);

// ---------------------------------------------------------------------------
// Admin views
// ---------------------------------------------------------------------------

struct UserViewEntry {
  std::string picture_id;
  Placement placement;
  Classification classification;
  Timestamp tagged_at{};
};

/// Effective events of one participant ordered by tagged_at.
/// Throws Error(UnknownParticipant) if the participant is not enrolled.
std::vector<UserViewEntry> per_user_view(const ExperimentSnapshot& snap, std::string_view participant_id);

struct PictureView {
  CircularSummary summary;
  std::vector<std::pair<std::string, Placement>> placements; // (participant_id, placement)
};

/// Throws Error(UnknownPicture) if the picture does not belong to the
/// experiment. An untagged picture yields the n = 0 summary.
PictureView per_picture_view(const ExperimentSnapshot& snap, std::string_view picture_id);

json user_view_json(const std::vector<UserViewEntry>& view);
json picture_view_json(const PictureView& view);

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCsvHeader =
    "experiment_id,participant_id,picture_id,picture_source,tagged_at,x,y,angle_deg,radius,"
    "sector_index,band_index,label,lat,lon";

struct CsvRow {
  std::string experiment_id;
  std::string participant_id;
  std::string picture_id;
  std::string picture_source;
  Timestamp tagged_at{};
  double x = 0.0;
  double y = 0.0;
  double angle_deg = 0.0;
  double radius = 0.0;
  int sector_index = 0;
  int band_index = 0;
  std::string label;
  std::optional<GeoPoint> location;
};

/// Six decimal places, round-half-even on the exact binary value; negative
/// zero prints as "0.000000".
std::string format_fixed6(double v);

std::vector<CsvRow> csv_rows(const ExperimentSnapshot& snap);

/// UTF-8, LF line endings, header always present, one row per effective
/// event in log order.
std::string export_csv(std::span<const CsvRow> rows);
std::string export_csv(const ExperimentSnapshot& snap);

/// Inverse of export_csv. Throws Error(BadRequest) on malformed input.
std::vector<CsvRow> parse_csv(std::string_view text);

} // namespace emomap
