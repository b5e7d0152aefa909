#include "emomap/platform.hpp"

#include <algorithm>

#include "emomap/error.hpp"

namespace emomap {

namespace {

[[noreturn]] void unknown(ErrorCode code, std::string_view what, std::string_view id) {
  throw Error(code, "unknown " + std::string(what) + " '" + std::string(id) + "'");
}

std::size_t index_of(const std::vector<std::string>& v, std::string_view item) {
  return static_cast<std::size_t>(std::find(v.begin(), v.end(), item) - v.begin());
}

} // namespace

Platform::Platform(std::shared_ptr<Store> store, PlatformOptions options, Clock clock)
    : store_(std::move(store)), options_(std::move(options)), clock_(std::move(clock)) {
  for (auto& m : load_all<TagMap>(*store_, EntityKind::TagMap)) tag_maps_.emplace(m.id, std::move(m));
  if (!tag_maps_.contains(kPlutchikId)) {
    auto wheel = plutchik_wheel();
    save(*store_, wheel);
    tag_maps_.emplace(wheel.id, std::move(wheel));
  }

  for (auto& p : load_all<Participant>(*store_, EntityKind::Participant)) {
    if (p.credentials) participant_by_username_[p.credentials->username] = p.id;
    participants_.emplace(p.id, std::move(p));
  }
  for (auto& r : load_all<Researcher>(*store_, EntityKind::Researcher))
    researchers_.emplace(r.username, std::move(r));
  for (auto& i : load_all<Invitation>(*store_, EntityKind::Invitation))
    invitations_.emplace(i.token, std::move(i));
  for (auto& p : load_all<PictureRecord>(*store_, EntityKind::Picture))
    pictures_.emplace(p.picture_id, std::move(p));
  for (auto& e : load_all<Experiment>(*store_, EntityKind::Experiment)) {
    auto s = std::make_shared<ExperimentSlot>();
    s->log = store_->read_events(e.id);
    s->experiment = std::move(e);
    experiments_.emplace(s->experiment.id, std::move(s));
  }
}

std::string Platform::new_id(std::string_view prefix) const {
  return std::string(prefix) + "-" + random_hex(8);
}

std::shared_ptr<Platform::ExperimentSlot> Platform::slot(std::string_view id) const {
  std::shared_lock lock(registry_mutex_);
  auto it = experiments_.find(id);
  if (it == experiments_.end()) unknown(ErrorCode::UnknownExperiment, "experiment", id);
  return it->second;
}

void Platform::require_tag_map(std::string_view id) const {
  std::shared_lock lock(registry_mutex_);
  if (!tag_maps_.contains(id)) unknown(ErrorCode::UnknownTagMap, "tag map", id);
}

void Platform::require_participants(const std::set<std::string>& ids) const {
  std::shared_lock lock(registry_mutex_);
  for (const auto& id : ids)
    if (!participants_.contains(id)) unknown(ErrorCode::UnknownParticipant, "participant", id);
}

// ---------------------------------------------------------------------------
// Tag maps and accounts

void Platform::register_tag_map(const TagMap& map) {
  require_valid_id(map.id, "tag map id");
  require_valid_tag_map(map);
  std::unique_lock lock(registry_mutex_);
  if (tag_maps_.contains(map.id))
    throw Error(ErrorCode::AlreadyExists, "tag map '" + map.id + "' already exists");
  save(*store_, map);
  tag_maps_.emplace(map.id, map);
}

TagMap Platform::tag_map(std::string_view id) const {
  std::shared_lock lock(registry_mutex_);
  auto it = tag_maps_.find(id);
  if (it == tag_maps_.end()) unknown(ErrorCode::UnknownTagMap, "tag map", id);
  return it->second;
}

std::vector<TagMap> Platform::tag_maps() const {
  std::shared_lock lock(registry_mutex_);
  std::vector<TagMap> out;
  for (const auto& [id, m] : tag_maps_) out.push_back(m);
  return out;
}

void Platform::add_researcher(std::string_view username, std::string_view password) {
  require_valid_id(username, "username");
  if (password.empty()) throw Error(ErrorCode::BadRequest, "password must be non-empty");
  Researcher r{std::string(username), hash_password(password, options_.password_iterations)};
  std::unique_lock lock(registry_mutex_);
  if (researchers_.contains(username))
    throw Error(ErrorCode::AlreadyExists, "researcher '" + r.username + "' already exists");
  save(*store_, r);
  researchers_.emplace(r.username, std::move(r));
}

ResearcherToken Platform::login_researcher(std::string_view username, std::string_view password) {
  std::string hash;
  {
    std::shared_lock lock(registry_mutex_);
    auto it = researchers_.find(username);
    if (it != researchers_.end()) hash = it->second.password_hash;
  }
  // hash outside the lock; PBKDF2 is deliberately slow
  if (hash.empty() || !verify_password(password, hash))
    throw Error(ErrorCode::BadCredentials, "invalid researcher credentials");

  ResearcherToken token{random_token(32), std::string(username), now() + options_.researcher_token_ttl};
  std::unique_lock lock(registry_mutex_);
  std::erase_if(researcher_tokens_, [&](const auto& kv) { return kv.second.expires_at <= now(); });
  researcher_tokens_.emplace(token.token, token);
  return token;
}

std::string Platform::authenticate_researcher(std::string_view token) const {
  std::shared_lock lock(registry_mutex_);
  auto it = researcher_tokens_.find(token);
  if (it == researcher_tokens_.end()) throw Error(ErrorCode::Unauthorized, "unknown bearer token");
  if (it->second.expires_at <= now()) throw Error(ErrorCode::Unauthorized, "bearer token expired");
  return it->second.username;
}

Participant Platform::add_participant(const ParticipantInput& input) {
  Participant p;
  p.id = input.id.value_or(new_id("p"));
  require_valid_id(p.id, "participant id");
  p.display_name = input.display_name.empty() ? p.id : input.display_name;
  p.handedness = input.handedness;
  if (input.username.has_value() != input.password.has_value())
    throw Error(ErrorCode::BadRequest, "username and password must be given together");
  if (input.username) {
    if (input.username->empty() || input.password->empty())
      throw Error(ErrorCode::BadRequest, "username and password must be non-empty");
    p.credentials = Credentials{*input.username, hash_password(*input.password, options_.password_iterations)};
  }

  std::unique_lock lock(registry_mutex_);
  if (participants_.contains(p.id))
    throw Error(ErrorCode::AlreadyExists, "participant '" + p.id + "' already exists");
  if (p.credentials && participant_by_username_.contains(p.credentials->username))
    throw Error(ErrorCode::AlreadyExists, "username '" + p.credentials->username + "' is taken");
  save(*store_, p);
  if (p.credentials) participant_by_username_[p.credentials->username] = p.id;
  participants_.emplace(p.id, p);
  return p;
}

Participant Platform::participant(std::string_view id) const {
  std::shared_lock lock(registry_mutex_);
  auto it = participants_.find(id);
  if (it == participants_.end()) unknown(ErrorCode::UnknownParticipant, "participant", id);
  return it->second;
}

// ---------------------------------------------------------------------------
// Experiments

Experiment Platform::create_experiment(const ExperimentDraft& draft) {
  if (!(draft.start_time < draft.finish_time))
    throw Error(ErrorCode::InvalidSchedule, "start_time must precede finish_time");
  require_tag_map(draft.tag_map_id);
  require_participants(draft.participant_ids);
  for (const auto& pic : draft.picture_ids) require_valid_id(pic, "picture id");
  if (draft.mode == ExperimentMode::Field && !draft.picture_ids.empty())
    throw Error(ErrorCode::WrongMode, "FIELD experiments collect participant pictures; picture_ids must be empty");

  auto s = std::make_shared<ExperimentSlot>();
  Experiment& e = s->experiment;
  e.id = draft.id.value_or(new_id("exp"));
  require_valid_id(e.id, "experiment id");
  e.mode = draft.mode;
  e.state = ExperimentState::Draft;
  e.start_time = draft.start_time;
  e.finish_time = draft.finish_time;
  e.tag_map_id = draft.tag_map_id;
  e.picture_ids = draft.picture_ids;
  e.ordering = draft.ordering;
  e.participant_ids = draft.participant_ids;
  e.locale_default = draft.locale_default.empty() ? "en" : draft.locale_default;

  std::unique_lock lock(registry_mutex_);
  if (experiments_.contains(e.id))
    throw Error(ErrorCode::AlreadyExists, "experiment '" + e.id + "' already exists");
  save(*store_, e);
  experiments_.emplace(e.id, s);
  return e;
}

Experiment Platform::update_experiment(std::string_view id, const ExperimentPatch& patch) {
  auto s = slot(id);
  std::lock_guard lock(s->mutex);
  Experiment e = s->experiment;
  if (patch.mode && *patch.mode != e.mode)
    throw Error(ErrorCode::ModeImmutable, "experiment mode cannot change after creation");
  if (e.state == ExperimentState::Finished)
    throw Error(ErrorCode::ExperimentFinished, "finished experiments cannot be modified");

  if (patch.start_time) e.start_time = *patch.start_time;
  if (patch.finish_time) e.finish_time = *patch.finish_time;
  if (!(e.start_time < e.finish_time))
    throw Error(ErrorCode::InvalidSchedule, "start_time must precede finish_time");

  if (patch.picture_ids) {
    if (e.mode == ExperimentMode::Field && !patch.picture_ids->empty())
      throw Error(ErrorCode::WrongMode, "FIELD experiments collect participant pictures");
    for (const auto& pic : *patch.picture_ids) require_valid_id(pic, "picture id");
    e.picture_ids = *patch.picture_ids;
    if (e.mode == ExperimentMode::Curated && e.state == ExperimentState::Active && e.picture_ids.empty())
      throw Error(ErrorCode::NoPictures, "an active CURATED experiment needs at least one picture");
  }
  if (patch.ordering) e.ordering = *patch.ordering;
  if (patch.participant_ids) {
    require_participants(*patch.participant_ids);
    e.participant_ids = *patch.participant_ids;
  }
  if (!patch.add_participant_ids.empty()) {
    std::set<std::string> added(patch.add_participant_ids.begin(), patch.add_participant_ids.end());
    require_participants(added);
    e.participant_ids.insert(added.begin(), added.end());
  }
  if (patch.locale_default) {
    if (patch.locale_default->empty()) throw Error(ErrorCode::BadRequest, "locale_default must be non-empty");
    e.locale_default = *patch.locale_default;
  }

  save(*store_, e);
  s->experiment = e;
  return e;
}

Experiment Platform::activate(std::string_view id) {
  auto s = slot(id);
  std::lock_guard lock(s->mutex);
  Experiment e = s->experiment;
  if (e.state != ExperimentState::Draft)
    throw Error(ErrorCode::InvalidStateTransition,
                "only DRAFT experiments can be activated (state is " + std::string(to_string(e.state)) + ")");
  if (e.mode == ExperimentMode::Curated && e.picture_ids.empty())
    throw Error(ErrorCode::NoPictures, "a CURATED experiment needs at least one picture before activation");
  e.state = ExperimentState::Active;
  save(*store_, e);
  s->experiment = e;
  return e;
}

Experiment Platform::finish(std::string_view id) {
  auto s = slot(id);
  std::lock_guard lock(s->mutex);
  Experiment e = s->experiment;
  if (e.state != ExperimentState::Active)
    throw Error(ErrorCode::InvalidStateTransition,
                "only ACTIVE experiments can be finished (state is " + std::string(to_string(e.state)) + ")");
  e.state = ExperimentState::Finished;
  save(*store_, e);
  s->experiment = e;
  return e;
}

Experiment Platform::experiment(std::string_view id) const {
  auto s = slot(id);
  std::lock_guard lock(s->mutex);
  return s->experiment;
}

std::vector<Experiment> Platform::experiments() const {
  std::vector<std::shared_ptr<ExperimentSlot>> slots;
  {
    std::shared_lock lock(registry_mutex_);
    for (const auto& [id, s] : experiments_) slots.push_back(s);
  }
  std::vector<Experiment> out;
  for (const auto& s : slots) {
    std::lock_guard lock(s->mutex);
    out.push_back(s->experiment);
  }
  return out;
}

bool Platform::is_active(std::string_view experiment_id) const {
  return emomap::is_active(experiment(experiment_id), now());
}

PictureRecord Platform::add_curated_picture(std::string_view experiment_id, std::string_view bytes,
                                            std::optional<std::string> picture_id) {
  auto s = slot(experiment_id);
  std::lock_guard lock(s->mutex);
  Experiment e = s->experiment;
  if (e.mode != ExperimentMode::Curated)
    throw Error(ErrorCode::WrongMode, "researcher pictures belong to CURATED experiments");
  if (e.state == ExperimentState::Finished)
    throw Error(ErrorCode::ExperimentFinished, "finished experiments cannot be modified");
  if (bytes.size() > options_.max_image_bytes)
    throw Error(ErrorCode::ImageTooLarge, "image exceeds " + std::to_string(options_.max_image_bytes) + " bytes");
  auto media_type = sniff_image_media_type(bytes);
  if (!media_type) throw Error(ErrorCode::UndecodableImage, "image is neither JPEG nor PNG");

  PictureRecord rec;
  rec.picture_id = picture_id.value_or(new_id("pic"));
  require_valid_id(rec.picture_id, "picture id");
  {
    std::shared_lock reg(registry_mutex_);
    if (pictures_.contains(rec.picture_id))
      throw Error(ErrorCode::AlreadyExists, "picture '" + rec.picture_id + "' already exists");
  }
  rec.experiment_id = e.id;
  rec.media_type = *media_type;
  rec.source = PictureSource::Curated;
  rec.uploaded_at = now();
  rec.blob_id = store_->put_blob(bytes, BlobMetadata{rec.media_type, rec.picture_id, std::nullopt,
                                                     std::nullopt, rec.uploaded_at});
  save(*store_, rec);
  {
    std::unique_lock reg(registry_mutex_);
    pictures_.emplace(rec.picture_id, rec);
  }
  if (index_of(e.picture_ids, rec.picture_id) == e.picture_ids.size()) {
    e.picture_ids.push_back(rec.picture_id);
    save(*store_, e);
    s->experiment = e;
  }
  return rec;
}

PictureRecord Platform::picture(std::string_view picture_id) const {
  std::shared_lock lock(registry_mutex_);
  auto it = pictures_.find(picture_id);
  if (it == pictures_.end()) unknown(ErrorCode::UnknownPicture, "picture", picture_id);
  return it->second;
}

std::string Platform::picture_bytes(std::string_view picture_id) const {
  auto rec = picture(picture_id);
  auto bytes = store_->get_blob(rec.blob_id);
  if (!bytes) throw Error(ErrorCode::UnknownPicture, "picture '" + rec.picture_id + "' has no stored image");
  return std::move(*bytes);
}

std::string Platform::picture_url(std::string_view picture_id) const {
  std::string base = options_.base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  return base + "/api/pictures/" + std::string(picture_id);
}

Invitation Platform::invite(std::string_view experiment_id, std::string_view participant_id,
                            std::optional<Timestamp> expires_at) {
  require_valid_id(participant_id, "participant id");
  auto s = slot(experiment_id);
  std::lock_guard lock(s->mutex);
  Experiment e = s->experiment;
  if (e.state == ExperimentState::Finished)
    throw Error(ErrorCode::ExperimentFinished, "finished experiments cannot issue invitations");

  bool known;
  {
    std::shared_lock reg(registry_mutex_);
    known = participants_.contains(participant_id);
  }
  if (!known) {
    ParticipantInput input;
    input.id = std::string(participant_id);
    add_participant(input);
  }
  if (!e.participant_ids.contains(std::string(participant_id))) {
    e.participant_ids.insert(std::string(participant_id));
    save(*store_, e);
    s->experiment = e;
  }

  Invitation inv;
  inv.token = random_token(16);
  inv.experiment_id = e.id;
  inv.participant_id = std::string(participant_id);
  std::string base = options_.base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  inv.url_payload = base + "/join?token=" + inv.token;
  inv.expires_at = expires_at;
  inv.created_at = now();

  std::unique_lock reg(registry_mutex_);
  save(*store_, inv);
  invitations_.emplace(inv.token, inv);
  return inv;
}

// ---------------------------------------------------------------------------
// Sessions

Session Platform::start_session(const std::string& participant_id, const std::string& experiment_id) {
  Session s;
  s.token = random_token(32);
  s.participant_id = participant_id;
  s.experiment_id = experiment_id;
  s.cursor = 0;
  s.created_at = now();

  std::lock_guard lock(sessions_mutex_);
  if (auto it = session_by_participant_.find(participant_id); it != session_by_participant_.end())
    sessions_.erase(it->second);
  session_by_participant_[participant_id] = s.token;
  sessions_.emplace(s.token, s);
  return s;
}

Session Platform::open_session_with_token(std::string_view invitation_token) {
  Invitation inv;
  {
    std::shared_lock lock(registry_mutex_);
    auto it = invitations_.find(invitation_token);
    if (it == invitations_.end()) throw Error(ErrorCode::BadCredentials, "unknown invitation token");
    inv = it->second;
  }
  auto t = now();
  if (inv.expires_at && t >= *inv.expires_at)
    throw Error(ErrorCode::TokenExpired, "invitation token has expired");
  auto e = experiment(inv.experiment_id);
  if (!emomap::is_active(e, t))
    throw Error(ErrorCode::ExperimentNotActive, "experiment '" + e.id + "' is not active");
  return start_session(inv.participant_id, inv.experiment_id);
}

Session Platform::open_session_with_password(std::string_view username, std::string_view password,
                                             std::optional<std::string> experiment_id) {
  Participant p;
  {
    std::shared_lock lock(registry_mutex_);
    auto it = participant_by_username_.find(username);
    if (it != participant_by_username_.end()) p = participants_.find(it->second)->second;
  }
  if (!p.credentials || !verify_password(password, p.credentials->password_hash))
    throw Error(ErrorCode::BadCredentials, "invalid participant credentials");

  auto t = now();
  if (experiment_id) {
    auto e = experiment(*experiment_id);
    if (!e.participant_ids.contains(p.id))
      throw Error(ErrorCode::Forbidden, "participant is not enrolled in experiment '" + e.id + "'");
    if (!emomap::is_active(e, t))
      throw Error(ErrorCode::ExperimentNotActive, "experiment '" + e.id + "' is not active");
    return start_session(p.id, e.id);
  }

  std::vector<std::string> candidates;
  for (const auto& e : experiments())
    if (e.participant_ids.contains(p.id) && emomap::is_active(e, t)) candidates.push_back(e.id);
  if (candidates.empty())
    throw Error(ErrorCode::ExperimentNotActive, "participant has no active experiment");
  if (candidates.size() > 1)
    throw Error(ErrorCode::BadRequest, "participant is enrolled in several active experiments; experiment_id required");
  return start_session(p.id, candidates.front());
}

Session Platform::session(std::string_view session_token) const {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(session_token);
  if (it == sessions_.end()) throw Error(ErrorCode::SessionInvalid, "session is not live");
  return it->second;
}

std::optional<Session> Platform::live_session_of(std::string_view participant_id) const {
  std::lock_guard lock(sessions_mutex_);
  auto it = session_by_participant_.find(participant_id);
  if (it == session_by_participant_.end()) return std::nullopt;
  return sessions_.find(it->second)->second;
}

std::vector<std::string> Platform::picture_order_for(const Session& s) const {
  return picture_order(experiment(s.experiment_id), s.participant_id);
}

std::optional<std::string> Platform::next_picture(std::string_view session_token) const {
  auto s = session(session_token);
  auto order = picture_order_for(s);
  if (s.cursor >= order.size()) return std::nullopt;
  return order[s.cursor];
}

TagEvent Platform::submit_tag(std::string_view session_token, const TagRequest& request) {
  auto sess = session(session_token);
  auto s = slot(sess.experiment_id);
  std::lock_guard lock(s->mutex);
  const Experiment& e = s->experiment;
  auto t = now();
  if (!emomap::is_active(e, t))
    throw Error(ErrorCode::ExperimentNotActive, "experiment '" + e.id + "' is not active");
  if (!e.participant_ids.contains(sess.participant_id))
    throw Error(ErrorCode::Forbidden, "participant is no longer enrolled");

  TagEvent ev;
  if (e.mode == ExperimentMode::Curated) {
    if (index_of(e.picture_ids, request.picture_id) == e.picture_ids.size())
      unknown(ErrorCode::UnknownPicture, "picture", request.picture_id);
    ev.picture_source = PictureSource::Curated;
  } else {
    std::shared_lock reg(registry_mutex_);
    auto it = pictures_.find(request.picture_id);
    if (it == pictures_.end() || it->second.experiment_id != e.id ||
        it->second.uploader_id != sess.participant_id)
      unknown(ErrorCode::UnknownPicture, "picture", request.picture_id);
    ev.picture_source = PictureSource::Participant;
    if (!request.location)
      throw Error(ErrorCode::MissingLocation, "tags on participant pictures must carry a location");
  }
  if (request.location) require_valid_location(*request.location);

  TagMap map = tag_map(e.tag_map_id);
  ev.classification = classify(map, request.placement);
  ev.event_id = new_id("ev");
  ev.experiment_id = e.id;
  ev.participant_id = sess.participant_id;
  ev.picture_id = request.picture_id;
  ev.placement = request.placement;
  ev.tagged_at = t;
  ev.client_time = request.client_time;
  ev.location = request.location;

  store_->append_event(e.id, ev);
  s->log.push_back(ev);

  if (e.mode == ExperimentMode::Curated) {
    auto order = picture_order(e, sess.participant_id);
    auto pos = index_of(order, ev.picture_id);
    std::lock_guard sl(sessions_mutex_);
    if (auto it = sessions_.find(session_token); it != sessions_.end())
      it->second.cursor = std::max(it->second.cursor, pos + 1);
  }
  return ev;
}

PictureRecord Platform::submit_field_picture(std::string_view session_token, std::string_view bytes,
                                             std::optional<GeoPoint> location,
                                             std::optional<Timestamp> client_time) {
  auto sess = session(session_token);
  auto s = slot(sess.experiment_id);
  std::lock_guard lock(s->mutex);
  const Experiment& e = s->experiment;
  if (e.mode != ExperimentMode::Field)
    throw Error(ErrorCode::WrongMode, "picture uploads belong to FIELD experiments");
  auto t = now();
  if (!emomap::is_active(e, t))
    throw Error(ErrorCode::ExperimentNotActive, "experiment '" + e.id + "' is not active");
  if (!e.participant_ids.contains(sess.participant_id))
    throw Error(ErrorCode::Forbidden, "participant is no longer enrolled");
  if (bytes.size() > options_.max_image_bytes)
    throw Error(ErrorCode::ImageTooLarge, "image exceeds " + std::to_string(options_.max_image_bytes) + " bytes");
  auto media_type = sniff_image_media_type(bytes);
  if (!media_type) throw Error(ErrorCode::UndecodableImage, "image is neither JPEG nor PNG");
  if (!location) throw Error(ErrorCode::MissingLocation, "field pictures must carry a location");
  require_valid_location(*location);

  PictureRecord rec;
  rec.picture_id = new_id("pic");
  rec.experiment_id = e.id;
  rec.media_type = *media_type;
  rec.source = PictureSource::Participant;
  rec.uploader_id = sess.participant_id;
  rec.location = location;
  rec.uploaded_at = t;
  rec.client_time = client_time;
  rec.blob_id = store_->put_blob(bytes, BlobMetadata{rec.media_type, rec.picture_id, rec.uploader_id,
                                                     rec.location, rec.uploaded_at});
  save(*store_, rec);
  std::unique_lock reg(registry_mutex_);
  pictures_.emplace(rec.picture_id, rec);
  return rec;
}

// ---------------------------------------------------------------------------

ExperimentSnapshot Platform::snapshot(std::string_view experiment_id) const {
  auto s = slot(experiment_id);
  ExperimentSnapshot snap;
  {
    std::lock_guard lock(s->mutex);
    snap.experiment = s->experiment;
    snap.log = s->log;
  }
  snap.tag_map = tag_map(snap.experiment.tag_map_id);
  {
    std::shared_lock lock(registry_mutex_);
    for (const auto& [id, pic] : pictures_)
      if (pic.experiment_id == snap.experiment.id) snap.pictures.push_back(pic);
  }
  snap.effective = effective_events(snap.log);
  return snap;
}

} // namespace emomap
