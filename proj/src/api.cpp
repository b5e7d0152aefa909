#include "emomap/api.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <condition_variable>
#include <functional>
#include <iostream>

#include "emomap/aggregation.hpp"
#include "emomap/error.hpp"

namespace emomap {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<std::string> configured(const TagMap& map, std::string_view tag) {
  auto key = lowercase(tag);
  for (const auto& [locale, labels] : map.locale_labels)
    if (lowercase(locale) == key) return locale;
  auto dash = key.find_first_of("-_");
  if (dash != std::string::npos) {
    auto primary = key.substr(0, dash);
    for (const auto& [locale, labels] : map.locale_labels)
      if (lowercase(locale) == primary) return locale;
  }
  return std::nullopt;
}

} // namespace

std::optional<std::string> negotiate_locale(const TagMap& map, std::optional<std::string_view> explicit_locale,
                                            std::string_view accept_language,
                                            std::string_view experiment_default) {
  if (explicit_locale && !explicit_locale->empty())
    if (auto hit = configured(map, *explicit_locale)) return hit;

  struct Range {
    std::string tag;
    double q;
    std::size_t order;
  };
  std::vector<Range> ranges;
  std::size_t order = 0;
  while (!accept_language.empty()) {
    auto comma = accept_language.find(',');
    auto item = trim(accept_language.substr(0, comma));
    accept_language = comma == std::string_view::npos ? std::string_view{} : accept_language.substr(comma + 1);
    if (item.empty()) continue;
    double q = 1.0;
    auto semi = item.find(';');
    auto tag = trim(item.substr(0, semi));
    if (semi != std::string_view::npos) {
      auto param = trim(item.substr(semi + 1));
      if (param.size() > 2 && (param[0] == 'q' || param[0] == 'Q') && param[1] == '=') {
        auto value = param.substr(2);
        double parsed = 0.0;
        auto r = std::from_chars(value.data(), value.data() + value.size(), parsed);
        q = r.ec == std::errc{} ? parsed : 0.0;
      }
    }
    if (tag.empty() || tag == "*" || q <= 0.0) continue;
    ranges.push_back({std::string(tag), q, order++});
  }
  std::stable_sort(ranges.begin(), ranges.end(), [](const Range& a, const Range& b) { return a.q > b.q; });
  for (const auto& r : ranges)
    if (auto hit = configured(map, r.tag)) return hit;

  if (!experiment_default.empty())
    if (auto hit = configured(map, experiment_default)) return hit;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

struct ApiServer::Impl {
  explicit Impl(Platform& p) : platform(p) {}

  Platform& platform;
  httplib::Server server;
  int bound_port = -1;

  struct CachedResponse {
    int status = 0;
    std::string body;
    std::string content_type;
    bool pending = true;
  };
  std::mutex idempotency_mutex;
  std::condition_variable idempotency_cv;
  std::map<std::string, CachedResponse> idempotency_cache;

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  void install_routes();

  // -- plumbing --------------------------------------------------------------

  static void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
  }

  static void send_error(httplib::Response& res, ErrorCode code, const std::string& message,
                         json extra = json::object()) {
    json err = {{"code", code_name(code)}, {"message", message}};
    for (auto& [k, v] : extra.items()) err[k] = v;
    send_json(res, http_status(code), json{{"error", std::move(err)}});
  }

  static Handler guarded(Handler fn) {
    return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_error(res, e.code(), e.what());
      } catch (const json::exception& e) {
        send_error(res, ErrorCode::BadRequest, std::string("malformed document: ") + e.what());
      } catch (const std::exception& e) {
        send_error(res, ErrorCode::IoError, e.what());
      }
    };
  }

  /// Replays the first response for a repeated Idempotency-Key from the same
  /// bearer on the same route.
  Handler idempotent(Handler fn) {
    return [this, fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
      auto key = req.get_header_value("Idempotency-Key");
      if (key.empty()) return fn(req, res);
      std::string cache_key = req.get_header_value("Authorization") + "|" + req.method + " " + req.path + "|" + key;
      {
        std::unique_lock lock(idempotency_mutex);
        auto it = idempotency_cache.find(cache_key);
        if (it != idempotency_cache.end()) {
          idempotency_cv.wait(lock, [&] { return !idempotency_cache.at(cache_key).pending; });
          const auto& cached = idempotency_cache.at(cache_key);
          res.status = cached.status;
          res.set_content(cached.body, cached.content_type);
          res.set_header("Idempotent-Replay", "true");
          return;
        }
        idempotency_cache.emplace(cache_key, CachedResponse{});
      }
      fn(req, res);
      {
        std::lock_guard lock(idempotency_mutex);
        auto& cached = idempotency_cache.at(cache_key);
        cached.status = res.status;
        cached.body = res.body;
        cached.content_type = res.get_header_value("Content-Type");
        cached.pending = false;
      }
      idempotency_cv.notify_all();
    };
  }

  static std::string bearer(const httplib::Request& req) {
    auto header = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (header.size() <= prefix.size() || lowercase(header.substr(0, prefix.size())) != "bearer ")
      throw Error(ErrorCode::Unauthorized, "missing bearer token");
    return std::string(trim(std::string_view(header).substr(prefix.size())));
  }

  std::string require_researcher(const httplib::Request& req) const {
    auto token = bearer(req);
    try {
      return platform.authenticate_researcher(token);
    } catch (const Error&) {
      bool is_participant = true;
      try {
        platform.session(token);
      } catch (const Error&) {
        is_participant = false;
      }
      if (is_participant) throw Error(ErrorCode::Forbidden, "researcher access required");
      throw;
    }
  }

  Session require_participant(const httplib::Request& req) const {
    auto token = bearer(req);
    try {
      return platform.session(token);
    } catch (const Error&) {
      bool is_researcher = true;
      try {
        platform.authenticate_researcher(token);
      } catch (const Error&) {
        is_researcher = false;
      }
      if (is_researcher) throw Error(ErrorCode::Forbidden, "participant session required");
      throw;
    }
  }

  static json body_json(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    auto j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::BadRequest, "request body must be a JSON object");
    return j;
  }

  static std::optional<Timestamp> optional_time(const json& body, const char* key) {
    if (!body.contains(key) || body.at(key).is_null()) return std::nullopt;
    auto t = parse_iso8601(body.at(key).get<std::string>());
    if (!t) throw Error(ErrorCode::BadRequest, std::string(key) + " is not an ISO-8601 timestamp");
    return t;
  }

  static Timestamp required_time(const json& body, const char* key) {
    auto t = optional_time(body, key);
    if (!t) throw Error(ErrorCode::BadRequest, std::string(key) + " is required");
    return *t;
  }

  static std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size()) return std::nullopt;
    return v;
  }

  std::optional<std::string> locale_for(const httplib::Request& req, const TagMap& map,
                                        const Experiment& e) const {
    std::optional<std::string_view> explicit_locale;
    std::string param;
    if (req.has_param("locale")) {
      param = req.get_param_value("locale");
      explicit_locale = param;
    }
    return negotiate_locale(map, explicit_locale, req.get_header_value("Accept-Language"), e.locale_default);
  }

  json experiment_json(const Experiment& e) const {
    json j = e;
    j.erase("version");
    j["active"] = emomap::is_active(e, platform.now());
    return j;
  }

  json tag_map_json(const TagMap& m) const {
    json j = m;
    j.erase("version");
    return j;
  }

  // -- handlers ----------------------------------------------------------------

  void login(const httplib::Request& req, httplib::Response& res) {
    auto body = body_json(req);
    auto token = platform.login_researcher(body.value("username", std::string()),
                                           body.value("password", std::string()));
    send_json(res, 200, {{"token", token.token}, {"expires_at", format_iso8601(token.expires_at)}});
  }

  void open_session(const httplib::Request& req, httplib::Response& res) {
    auto body = body_json(req);
    Session s;
    if (body.contains("token")) {
      s = platform.open_session_with_token(body.at("token").get<std::string>());
    } else if (body.contains("username")) {
      std::optional<std::string> experiment_id;
      if (body.contains("experiment_id")) experiment_id = body.at("experiment_id").get<std::string>();
      s = platform.open_session_with_password(body.at("username").get<std::string>(),
                                              body.value("password", std::string()), experiment_id);
    } else {
      throw Error(ErrorCode::BadRequest, "provide an invitation token or username and password");
    }
    auto e = platform.experiment(s.experiment_id);
    auto p = platform.participant(s.participant_id);
    send_json(res, 200,
              {{"session_token", s.token},
               {"participant_id", s.participant_id},
               {"experiment_id", s.experiment_id},
               {"mode", to_string(e.mode)},
               {"tag_map_id", e.tag_map_id},
               {"handedness", to_string(p.handedness)},
               {"cursor", s.cursor},
               {"created_at", format_iso8601(s.created_at)}});
  }

  void next(const httplib::Request& req, httplib::Response& res) {
    auto s = require_participant(req);
    auto e = platform.experiment(s.experiment_id);
    auto picture_id = platform.next_picture(s.token);
    if (!picture_id) {
      send_json(res, 200, {{"done", true}});
      return;
    }
    auto map = platform.tag_map(e.tag_map_id);
    auto locale = locale_for(req, map, e);
    send_json(res, 200,
              {{"done", false},
               {"picture_id", *picture_id},
               {"picture_url", platform.picture_url(*picture_id)},
               {"tag_map", tag_map_json(map)},
               {"locale", locale ? json(*locale) : json(nullptr)},
               {"labels", labels_for(map, locale)}});
  }

  void tag(const httplib::Request& req, httplib::Response& res) {
    auto s = require_participant(req);
    auto body = body_json(req);

    json missing = json::object();
    for (const char* field : {"picture_id", "x", "y"})
      if (!body.contains(field)) missing[field] = "required";
    if (!missing.empty()) {
      send_error(res, ErrorCode::BadRequest, "missing required fields", {{"fields", missing}});
      return;
    }
    TagRequest request;
    request.picture_id = body.at("picture_id").get<std::string>();
    request.placement = {body.at("x").get<double>(), body.at("y").get<double>()};
    bool has_lat = body.contains("lat") && !body.at("lat").is_null();
    bool has_lon = body.contains("lon") && !body.at("lon").is_null();
    if (has_lat != has_lon) {
      send_error(res, ErrorCode::MissingLocation, "lat and lon must be supplied together",
                 {{"fields", {{has_lat ? "lon" : "lat", "required"}}}});
      return;
    }
    if (has_lat) request.location = GeoPoint{body.at("lat").get<double>(), body.at("lon").get<double>()};
    request.client_time = optional_time(body, "client_time");

    TagEvent ev;
    try {
      ev = platform.submit_tag(s.token, request);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::CenterAmbiguous || e.code() == ErrorCode::OutOfDisc) {
        double r = std::hypot(request.placement.x, request.placement.y);
        json fields = {{"x", request.placement.x}, {"y", request.placement.y},
                       {"radius", std::isfinite(r) ? json(r) : json(nullptr)}};
        send_error(res, e.code(), e.what(), {{"fields", fields}});
        return;
      }
      throw;
    }
    auto e = platform.experiment(s.experiment_id);
    auto map = platform.tag_map(e.tag_map_id);
    auto locale = locale_for(req, map, e);
    json doc = ev;
    doc["localized_label"] = labels_for(map, locale)[ev.classification.sector_index][ev.classification.band_index];
    send_json(res, 201, doc);
  }

  void field_picture(const httplib::Request& req, httplib::Response& res) {
    auto s = require_participant(req);
    if (!req.is_multipart_form_data() || !req.has_file("image"))
      throw Error(ErrorCode::BadRequest, "multipart field 'image' is required");
    const auto image = req.get_file_value("image");

    std::optional<GeoPoint> location;
    bool has_lat = req.has_file("lat"), has_lon = req.has_file("lon");
    if (has_lat && has_lon) {
      auto lat = parse_number(req.get_file_value("lat").content);
      auto lon = parse_number(req.get_file_value("lon").content);
      if (!lat || !lon) throw Error(ErrorCode::InvalidLocation, "lat and lon must be numbers");
      location = GeoPoint{*lat, *lon};
    }
    std::optional<Timestamp> client_time;
    if (req.has_file("client_time")) {
      client_time = parse_iso8601(trim(req.get_file_value("client_time").content));
      if (!client_time) throw Error(ErrorCode::BadRequest, "client_time is not an ISO-8601 timestamp");
    }
    // size and mode are checked before the location so oversize uploads
    // report 413 regardless of the other fields
    auto rec = platform.submit_field_picture(s.token, image.content, location, client_time);
    send_json(res, 201, {{"picture_id", rec.picture_id},
                         {"picture_url", platform.picture_url(rec.picture_id)},
                         {"blob_id", rec.blob_id}});
  }

  void picture(const httplib::Request& req, httplib::Response& res) {
    auto token = bearer(req);
    auto rec = platform.picture(req.matches[1].str());
    bool researcher = true;
    try {
      platform.authenticate_researcher(token);
    } catch (const Error&) {
      researcher = false;
    }
    if (!researcher) {
      auto s = require_participant(req);
      bool allowed = rec.experiment_id == s.experiment_id &&
                     (rec.source == PictureSource::Curated || rec.uploader_id == s.participant_id);
      if (!allowed) throw Error(ErrorCode::Forbidden, "picture belongs to another experiment or participant");
    }
    auto bytes = platform.picture_bytes(rec.picture_id);
    res.status = 200;
    res.set_content(std::move(bytes), rec.media_type);
  }

  void create_experiment(const httplib::Request& req, httplib::Response& res) {
    require_researcher(req);
    auto body = body_json(req);
    ExperimentDraft draft;
    if (body.contains("id")) draft.id = body.at("id").get<std::string>();
    auto mode = parse_mode(body.value("mode", std::string()));
    if (!mode) throw Error(ErrorCode::BadRequest, "mode must be CURATED or FIELD");
    draft.mode = *mode;
    draft.start_time = required_time(body, "start_time");
    draft.finish_time = required_time(body, "finish_time");
    draft.tag_map_id = body.value("tag_map_id", std::string(kPlutchikId));
    draft.picture_ids = body.value("picture_ids", std::vector<std::string>{});
    if (body.contains("ordering")) {
      auto o = parse_ordering(body.at("ordering").get<std::string>());
      if (!o) throw Error(ErrorCode::BadRequest, "ordering must be FIXED or RANDOM_PER_PARTICIPANT");
      draft.ordering = *o;
    }
    draft.participant_ids = body.value("participant_ids", std::set<std::string>{});
    draft.locale_default = body.value("locale_default", std::string("en"));
    send_json(res, 201, experiment_json(platform.create_experiment(draft)));
  }

  void list_experiments(const httplib::Request& req, httplib::Response& res) {
    require_researcher(req);
    json list = json::array();
    for (const auto& e : platform.experiments()) list.push_back(experiment_json(e));
    send_json(res, 200, {{"experiments", std::move(list)}});
  }

  void get_experiment(const httplib::Request& req, httplib::Response& res) {
    require_researcher(req);
    send_json(res, 200, experiment_json(platform.experiment(req.matches[1].str())));
  }

  void patch_experiment(const httplib::Request& req, httplib::Response& res) {
    require_researcher(req);
    auto body = body_json(req);
    ExperimentPatch patch;
    for (auto& [key, value] : body.items()) {
      if (key == "mode") {
        auto m = parse_mode(value.get<std::string>());
        if (!m) throw Error(ErrorCode::ModeImmutable, "experiment mode cannot change after creation");
        patch.mode = *m;
      } else if (key == "start_time") {
        patch.start_time = required_time(body, "start_time");
      } else if (key == "finish_time") {
        patch.finish_time = required_time(body, "finish_time");
      } else if (key == "picture_ids") {
        patch.picture_ids = value.get<std::vector<std::string>>();
      } else if (key == "ordering") {
        auto o = parse_ordering(value.get<std::string>());
        if (!o) throw Error(ErrorCode::BadRequest, "ordering must be FIXED or RANDOM_PER_PARTICIPANT");
        patch.ordering = *o;
      } else if (key == "participant_ids") {
        patch.participant_ids = value.get<std::set<std::string>>();
      } else if (key == "add_participant_ids") {
        patch.add_participant_ids = value.get<std::vector<std::string>>();
      } else if (key == "locale_default") {
        patch.locale_default = value.get<std::string>();
      } else {
        throw Error(ErrorCode::BadRequest, "field '" + key + "' cannot be patched");
      }
    }
    send_json(res, 200, experiment_json(platform.update_experiment(req.matches[1].str(), patch)));
  }

  void transition(const httplib::Request& req, httplib::Response& res) {
    require_researcher(req);
    auto id = req.matches[1].str();
    auto action = req.matches[2].str();
    auto e = action == "activate" ? platform.activate(id) : platform.finish(id);
    send_json(res, 200, experiment_json(e));
  }

  void add_pictures(const httplib::Request& req, httplib::Response& res) {
    require_researcher(req);
    auto id = req.matches[1].str();
    platform.experiment(id);
    if (!req.is_multipart_form_data() || !req.has_file("image"))
      throw Error(ErrorCode::BadRequest, "multipart field 'image' is required");
    auto images = req.get_file_values("image");
    auto ids = req.get_file_values("picture_id");
    json added = json::array();
    for (std::size_t i = 0; i < images.size(); ++i) {
      std::optional<std::string> picture_id;
      if (i < ids.size() && !ids[i].content.empty()) picture_id = std::string(trim(ids[i].content));
      auto rec = platform.add_curated_picture(id, images[i].content, picture_id);
      added.push_back({{"picture_id", rec.picture_id},
                       {"picture_url", platform.picture_url(rec.picture_id)},
                       {"blob_id", rec.blob_id},
                       {"media_type", rec.media_type}});
    }
    send_json(res, 201, {{"pictures", std::move(added)},
                         {"experiment", experiment_json(platform.experiment(id))}});
  }

  void create_invitation(const httplib::Request& req, httplib::Response& res) {
    require_researcher(req);
    auto body = body_json(req);
    auto inv = platform.invite(body.at("experiment_id").get<std::string>(),
                               body.at("participant_id").get<std::string>(), optional_time(body, "expires_at"));
    json j = inv;
    j.erase("version");
    send_json(res, 201, j);
  }

  void create_participant(const httplib::Request& req, httplib::Response& res) {
    require_researcher(req);
    auto body = body_json(req);
    ParticipantInput input;
    if (body.contains("id")) input.id = body.at("id").get<std::string>();
    input.display_name = body.value("display_name", std::string());
    if (body.contains("username")) input.username = body.at("username").get<std::string>();
    if (body.contains("password")) input.password = body.at("password").get<std::string>();
    if (body.contains("handedness")) {
      auto h = parse_handedness(body.at("handedness").get<std::string>());
      if (!h) throw Error(ErrorCode::BadRequest, "handedness must be RIGHT or LEFT");
      input.handedness = *h;
    }
    send_json(res, 201, public_participant_json(platform.add_participant(input)));
  }

  void get_participant(const httplib::Request& req, httplib::Response& res) {
    require_researcher(req);
    send_json(res, 200, public_participant_json(platform.participant(req.matches[1].str())));
  }

  void create_tag_map(const httplib::Request& req, httplib::Response& res) {
    require_researcher(req);
    auto map = body_json(req).get<TagMap>();
    auto violations = validate_tag_map(map);
    if (!violations.empty()) {
      json list = json::array();
      for (const auto& v : violations) list.push_back({{"code", v.code}, {"detail", v.detail}});
      send_error(res, ErrorCode::InvalidTagMap, "tag map violates its invariants", {{"violations", list}});
      return;
    }
    platform.register_tag_map(map);
    send_json(res, 201, tag_map_json(map));
  }

  void list_tag_maps(const httplib::Request& req, httplib::Response& res) {
    require_researcher(req);
    json list = json::array();
    for (const auto& m : platform.tag_maps()) list.push_back(tag_map_json(m));
    send_json(res, 200, {{"tag_maps", std::move(list)}});
  }

  void get_tag_map(const httplib::Request& req, httplib::Response& res) {
    require_researcher(req);
    send_json(res, 200, tag_map_json(platform.tag_map(req.matches[1].str())));
  }

  void user_results(const httplib::Request& req, httplib::Response& res) {
    require_researcher(req);
    auto snap = platform.snapshot(req.matches[1].str());
    auto view = per_user_view(snap, req.matches[2].str());
    json j = user_view_json(view);
    j["participant_id"] = req.matches[2].str();
    send_json(res, 200, j);
  }

  void picture_results(const httplib::Request& req, httplib::Response& res) {
    require_researcher(req);
    auto snap = platform.snapshot(req.matches[1].str());
    json j = picture_view_json(per_picture_view(snap, req.matches[2].str()));
    j["picture_id"] = req.matches[2].str();
    send_json(res, 200, j);
  }

  void export_csv_route(const httplib::Request& req, httplib::Response& res) {
    require_researcher(req);
    auto snap = platform.snapshot(req.matches[1].str());
    res.status = 200;
    res.set_content(export_csv(snap), "text/csv; charset=utf-8");
  }

  void map_route(const httplib::Request& req, httplib::Response& res) {
    require_researcher(req);
    auto snap = platform.snapshot(req.matches[1].str());
    if (!req.has_param("cell_size")) throw Error(ErrorCode::InvalidCellSize, "cell_size is required");
    auto cell = parse_number(req.get_param_value("cell_size"));
    if (!cell) throw Error(ErrorCode::InvalidCellSize, "cell_size must be a number");
    auto m = grid_aggregate(snap.effective, snap.tag_map, *cell);
    res.status = 200;
    res.set_content(emotion_map_document(m), "application/json; charset=utf-8");
  }
};

void ApiServer::Impl::install_routes() {
  auto bind = [this](void (Impl::*method)(const httplib::Request&, httplib::Response&)) {
    return guarded([this, method](const httplib::Request& req, httplib::Response& res) { (this->*method)(req, res); });
  };
  auto mutating = [this, &bind](void (Impl::*method)(const httplib::Request&, httplib::Response&)) {
    return idempotent(bind(method));
  };
  const std::string id = "([A-Za-z0-9_-]+)";

  server.Post("/api/login", bind(&Impl::login));
  server.Post("/api/session", mutating(&Impl::open_session));
  server.Get("/api/session/next", bind(&Impl::next));
  server.Post("/api/tags", mutating(&Impl::tag));
  server.Post("/api/field-pictures", mutating(&Impl::field_picture));
  server.Get("/api/pictures/" + id, bind(&Impl::picture));

  server.Post("/api/experiments", mutating(&Impl::create_experiment));
  server.Get("/api/experiments", bind(&Impl::list_experiments));
  server.Get("/api/experiments/" + id, bind(&Impl::get_experiment));
  server.Patch("/api/experiments/" + id, mutating(&Impl::patch_experiment));
  server.Post("/api/experiments/" + id + "/(activate|finish)", mutating(&Impl::transition));
  server.Post("/api/experiments/" + id + "/pictures", mutating(&Impl::add_pictures));
  server.Get("/api/experiments/" + id + "/results/users/" + id, bind(&Impl::user_results));
  server.Get("/api/experiments/" + id + "/results/pictures/" + id, bind(&Impl::picture_results));
  server.Get("/api/experiments/" + id + "/export\\.csv", bind(&Impl::export_csv_route));
  server.Get("/api/experiments/" + id + "/map", bind(&Impl::map_route));

  server.Post("/api/invitations", mutating(&Impl::create_invitation));
  server.Post("/api/participants", mutating(&Impl::create_participant));
  server.Get("/api/participants/" + id, bind(&Impl::get_participant));
  server.Post("/api/tag-maps", mutating(&Impl::create_tag_map));
  server.Get("/api/tag-maps", bind(&Impl::list_tag_maps));
  server.Get("/api/tag-maps/" + id, bind(&Impl::get_tag_map));

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    std::string code = res.status == 404 ? "not_found"
                       : res.status == 413 ? "image_too_large"
                                           : "http_" + std::to_string(res.status);
    res.set_content(json{{"error", {{"code", code}, {"message", httplib::status_message(res.status)}}}}.dump(),
                    "application/json; charset=utf-8");
  });
  server.set_payload_max_length(platform.options().max_image_bytes + 1024 * 1024);
  // SO_REUSEADDR only: the library default (SO_REUSEPORT) lets a second
  // process share an occupied port silently.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
}

ApiServer::ApiServer(Platform& platform) : impl_(std::make_unique<Impl>(platform)) { impl_->install_routes(); }

ApiServer::~ApiServer() { stop(); }

void ApiServer::mount_static(const std::string& dir) {
  if (!impl_->server.set_mount_point("/", dir))
    throw Error(ErrorCode::IoError, "static directory '" + dir + "' does not exist");
}

int ApiServer::bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  impl_->bound_port = bound;
  return bound;
}

void ApiServer::listen() {
  if (impl_->bound_port < 0) throw Error(ErrorCode::IoError, "listen() before bind()");
  impl_->server.listen_after_bind();
}

void ApiServer::stop() {
  if (impl_) impl_->server.stop();
}

bool ApiServer::is_running() const { return impl_->server.is_running(); }

} // namespace emomap
