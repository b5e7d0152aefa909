#pragma once

// Tag maps: labeled partitions of the unit disc into equal angular sectors
// and concentric radial bands. The Plutchik wheel of emotions is the
// canonical instance. All angles are degrees measured clockwise from "up"
// (+y), so sector 0 of an unrotated map is centered on the top of the wheel.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace emomap {

using LabelMatrix = std::vector<std::vector<std::string>>; // [sector][band]

inline constexpr double kCenterDeadZone = 0.02;
inline constexpr double kDiscTolerance = 1e-9;

struct TagMap {
  std::string id;
  int sector_count = 0;
  double sector_offset_deg = 0.0;
  std::vector<double> band_boundaries; // ascending radii in (0, 1)
  LabelMatrix labels;
  std::map<std::string, LabelMatrix> locale_labels;

  int band_count() const noexcept { return static_cast<int>(band_boundaries.size()) + 1; }
  double sector_width_deg() const noexcept { return 360.0 / sector_count; }

  friend bool operator==(const TagMap&, const TagMap&) = default;
};

/// Eight sectors clockwise from the top (joy, trust, fear, surprise, sadness,
/// disgust, anger, anticipation), three equal bands with the intense form
/// innermost. Ships English defaults and a Polish override.
TagMap plutchik_wheel();

inline constexpr std::string_view kPlutchikId = "plutchik";

struct Placement {
  double x = 0.0; // +x rightward
  double y = 0.0; // +y upward

  friend bool operator==(const Placement&, const Placement&) = default;
};

struct Classification {
  int sector_index = 0;
  int band_index = 0;
  std::string label;
  double angle_deg = 0.0; // [0, 360)
  double radius = 0.0;    // [0, 1]

  friend bool operator==(const Classification&, const Classification&) = default;
};

struct TagMapViolation {
  std::string code; // machine-readable, e.g. "bands_not_ascending"
  std::string detail;
};

/// Every invariant violation of `map`; empty means the map is valid.
std::vector<TagMapViolation> validate_tag_map(const TagMap& map);

/// Throws Error(InvalidTagMap) listing the violation codes.
void require_valid_tag_map(const TagMap& map);

/// Clockwise-from-top angle of (x, y), in [0, 360).
double clockwise_angle_deg(double x, double y) noexcept;

/// Sector containing a clockwise angle. The counterclockwise edge of each
/// sector belongs to it.
int sector_of_angle(const TagMap& map, double angle_deg) noexcept;

/// Smallest band whose outer boundary is >= r; boundary radii belong to the
/// inner band.
int band_of_radius(const TagMap& map, double radius) noexcept;

/// Label matrix for `locale`, falling back to the default labels when the
/// locale has no override.
const LabelMatrix& labels_for(const TagMap& map, std::optional<std::string_view> locale);

/// Throws Error(CenterAmbiguous) for r < kCenterDeadZone and Error(OutOfDisc)
/// for r > 1 + kDiscTolerance or non-finite coordinates. Radii in
/// (1, 1 + kDiscTolerance] are clamped to 1.
Classification classify(const TagMap& map, Placement p,
                        std::optional<std::string_view> locale = std::nullopt);

/// Shortest angular separation in [0, 180].
double angular_distance(double a_deg, double b_deg) noexcept;
double angular_distance(const Classification& a, const Classification& b) noexcept;

} // namespace emomap
