#include "emomap/wheel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "emomap/error.hpp"

namespace emomap {

TagMap plutchik_wheel() {
  TagMap map;
  map.id = std::string(kPlutchikId);
  map.sector_count = 8;
  map.sector_offset_deg = 0.0;
  map.band_boundaries = {1.0 / 3.0, 2.0 / 3.0};
  map.labels = {
      {"ecstasy", "joy", "serenity"},
      {"admiration", "trust", "acceptance"},
      {"terror", "fear", "apprehension"},
      {"amazement", "surprise", "distraction"},
      {"grief", "sadness", "pensiveness"},
      {"loathing", "disgust", "boredom"},
      {"rage", "anger", "annoyance"},
      {"vigilance", "anticipation", "interest"},
  };
  map.locale_labels["pl"] = {
      {"ekstaza", "radość", "pogoda ducha"},
      {"podziw", "zaufanie", "akceptacja"},
      {"przerażenie", "strach", "obawa"},
      {"zdumienie", "zaskoczenie", "roztargnienie"},
      {"rozpacz", "smutek", "zaduma"},
      {"wstręt", "obrzydzenie", "znudzenie"},
      {"furia", "złość", "irytacja"},
      {"czujność", "oczekiwanie", "zainteresowanie"},
  };
  return map;
}

namespace {

void check_matrix(const LabelMatrix& m, int sectors, int bands, const std::string& where,
                  std::vector<TagMapViolation>& out) {
  bool shape_ok = static_cast<int>(m.size()) == sectors;
  for (const auto& row : m)
    if (static_cast<int>(row.size()) != bands) shape_ok = false;
  if (!shape_ok) {
    out.push_back({where == "labels" ? "label_matrix_shape" : "locale_matrix_shape",
                   where + " must be " + std::to_string(sectors) + "x" + std::to_string(bands)});
    return;
  }
  for (int s = 0; s < sectors; ++s)
    for (int b = 0; b < bands; ++b)
      if (m[s][b].empty())
        out.push_back({"empty_label", where + "[" + std::to_string(s) + "][" +
                                          std::to_string(b) + "] is empty"});
}

} // namespace

std::vector<TagMapViolation> validate_tag_map(const TagMap& map) {
  std::vector<TagMapViolation> out;
  if (map.id.empty()) out.push_back({"empty_id", "id must be non-empty"});
  if (map.sector_count < 2) out.push_back({"sector_count_too_small", "sector_count must be >= 2"});
  if (!(map.sector_offset_deg >= 0.0 && map.sector_offset_deg < 360.0))
    out.push_back({"offset_out_of_range", "sector_offset_deg must lie in [0, 360)"});

  for (std::size_t i = 0; i < map.band_boundaries.size(); ++i) {
    double b = map.band_boundaries[i];
    if (!(b > 0.0 && b < 1.0))
      out.push_back({"band_boundary_out_of_range",
                     "band_boundaries[" + std::to_string(i) + "] must lie in (0, 1)"});
    if (i > 0 && !(b > map.band_boundaries[i - 1]))
      out.push_back({"bands_not_ascending",
                     "band_boundaries[" + std::to_string(i) + "] is not above its predecessor"});
  }

  if (map.sector_count >= 1) {
    check_matrix(map.labels, map.sector_count, map.band_count(), "labels", out);
    for (const auto& [locale, matrix] : map.locale_labels) {
      if (locale.empty()) out.push_back({"empty_locale", "locale code must be non-empty"});
      check_matrix(matrix, map.sector_count, map.band_count(), "locale_labels." + locale, out);
    }
  }
  return out;
}

void require_valid_tag_map(const TagMap& map) {
  auto violations = validate_tag_map(map);
  if (violations.empty()) return;
  std::string msg = "invalid tag map '" + map.id + "':";
  for (const auto& v : violations) msg += " " + v.code;
  throw Error(ErrorCode::InvalidTagMap, msg);
}

double clockwise_angle_deg(double x, double y) noexcept {
  double deg = std::atan2(x, y) * (180.0 / std::numbers::pi);
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

int sector_of_angle(const TagMap& map, double angle_deg) noexcept {
  const double width = map.sector_width_deg();
  double shifted = std::fmod(angle_deg - map.sector_offset_deg + width / 2.0, 360.0);
  if (shifted < 0.0) shifted += 360.0;
  int s = static_cast<int>(std::floor(shifted / width));
  // fmod can land a hair under 360 and round the quotient up to N
  return s >= map.sector_count ? s - map.sector_count : s;
}

int band_of_radius(const TagMap& map, double radius) noexcept {
  for (std::size_t b = 0; b < map.band_boundaries.size(); ++b)
    if (radius <= map.band_boundaries[b]) return static_cast<int>(b);
  return map.band_count() - 1;
}

const LabelMatrix& labels_for(const TagMap& map, std::optional<std::string_view> locale) {
  if (locale) {
    auto it = map.locale_labels.find(std::string(*locale));
    if (it != map.locale_labels.end()) return it->second;
  }
  return map.labels;
}

Classification classify(const TagMap& map, Placement p, std::optional<std::string_view> locale) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y))
    throw Error(ErrorCode::OutOfDisc, "placement coordinates must be finite");
  double r = std::hypot(p.x, p.y);
  if (r > 1.0 + kDiscTolerance) throw Error(ErrorCode::OutOfDisc, "placement lies outside the unit disc");
  if (r < kCenterDeadZone)
    throw Error(ErrorCode::CenterAmbiguous, "placement too close to the wheel center");
  if (r > 1.0) r = 1.0;

  Classification c;
  c.angle_deg = clockwise_angle_deg(p.x, p.y);
  c.radius = r;
  c.sector_index = sector_of_angle(map, c.angle_deg);
  c.band_index = band_of_radius(map, r);
  c.label = labels_for(map, locale)[c.sector_index][c.band_index];
  return c;
}

double angular_distance(double a_deg, double b_deg) noexcept {
  double d = std::fmod(std::fabs(a_deg - b_deg), 360.0);
  return std::min(d, 360.0 - d);
}

double angular_distance(const Classification& a, const Classification& b) noexcept {
  return angular_distance(a.angle_deg, b.angle_deg);
}

} // namespace emomap
