#pragma once

// The experiment service: configuration and lifecycle of experiments,
// participant sessions, invitation tokens, and tag ingest. State lives in a
// Store; this class keeps an in-memory mirror and serializes mutations per
// experiment.
//
// Lock order: experiment slot -> registry -> sessions. Never the reverse.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "emomap/crypto.hpp"
#include "emomap/experiment.hpp"
#include "emomap/image.hpp"
#include "emomap/storage.hpp"

namespace emomap {

struct PlatformOptions {
  std::string base_url = "http://localhost:8080";
  std::size_t max_image_bytes = kDefaultMaxImageBytes;
  int password_iterations = kDefaultPbkdf2Iterations;
  std::chrono::hours researcher_token_ttl{24};
};

struct ParticipantInput {
  std::optional<std::string> id;
  std::string display_name;
  std::optional<std::string> username;
  std::optional<std::string> password;
  Handedness handedness = Handedness::Right;
};

struct TagRequest {
  std::string picture_id;
  Placement placement;
  std::optional<GeoPoint> location;
  std::optional<Timestamp> client_time;
};

struct ResearcherToken {
  std::string token;
  std::string username;
  Timestamp expires_at{};
};

class Platform {
public:
  Platform(std::shared_ptr<Store> store, PlatformOptions options = {}, Clock clock = system_now);

  Platform(const Platform&) = delete;
  Platform& operator=(const Platform&) = delete;

  Timestamp now() const { return clock_(); }
  const PlatformOptions& options() const noexcept { return options_; }
  Store& store() noexcept { return *store_; }

  // -- tag maps --------------------------------------------------------------
  void register_tag_map(const TagMap& map);
  TagMap tag_map(std::string_view id) const;
  std::vector<TagMap> tag_maps() const;

  // -- accounts --------------------------------------------------------------
  void add_researcher(std::string_view username, std::string_view password);
  ResearcherToken login_researcher(std::string_view username, std::string_view password);
  /// Username behind a bearer token. Throws Error(Unauthorized) if unknown
  /// or expired.
  std::string authenticate_researcher(std::string_view token) const;

  Participant add_participant(const ParticipantInput& input);
  Participant participant(std::string_view id) const;

  // -- experiments -----------------------------------------------------------
  Experiment create_experiment(const ExperimentDraft& draft);
  Experiment update_experiment(std::string_view id, const ExperimentPatch& patch);
  Experiment activate(std::string_view id);
  Experiment finish(std::string_view id);
  Experiment experiment(std::string_view id) const;
  std::vector<Experiment> experiments() const;
  bool is_active(std::string_view experiment_id) const;

  PictureRecord add_curated_picture(std::string_view experiment_id, std::string_view bytes,
                                    std::optional<std::string> picture_id = std::nullopt);
  PictureRecord picture(std::string_view picture_id) const;
  std::string picture_bytes(std::string_view picture_id) const;
  std::string picture_url(std::string_view picture_id) const;

  /// Mints a bearer token bound to (experiment, participant). Unknown
  /// participants are created token-only; the participant is enrolled.
  Invitation invite(std::string_view experiment_id, std::string_view participant_id,
                    std::optional<Timestamp> expires_at = std::nullopt);

  // -- participant sessions --------------------------------------------------
  Session open_session_with_token(std::string_view invitation_token);
  /// Without an experiment id the participant's single active experiment is
  /// chosen.
  Session open_session_with_password(std::string_view username, std::string_view password,
                                     std::optional<std::string> experiment_id = std::nullopt);
  /// Throws Error(SessionInvalid) if the token is unknown or superseded.
  Session session(std::string_view session_token) const;
  std::optional<Session> live_session_of(std::string_view participant_id) const;

  std::vector<std::string> picture_order_for(const Session& s) const;
  /// Next picture at the session cursor, nullopt when the order is exhausted.
  std::optional<std::string> next_picture(std::string_view session_token) const;

  TagEvent submit_tag(std::string_view session_token, const TagRequest& request);
  PictureRecord submit_field_picture(std::string_view session_token, std::string_view bytes,
                                     std::optional<GeoPoint> location,
                                     std::optional<Timestamp> client_time);

  // -- read side -------------------------------------------------------------
  ExperimentSnapshot snapshot(std::string_view experiment_id) const;

private:
  struct ExperimentSlot {
    mutable std::mutex mutex;
    Experiment experiment;
    std::vector<TagEvent> log;
  };

  std::shared_ptr<ExperimentSlot> slot(std::string_view id) const;
  void require_tag_map(std::string_view id) const;
  void require_participants(const std::set<std::string>& ids) const;
  Session start_session(const std::string& participant_id, const std::string& experiment_id);
  std::string new_id(std::string_view prefix) const;

  std::shared_ptr<Store> store_;
  PlatformOptions options_;
  Clock clock_;

  mutable std::shared_mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<ExperimentSlot>, std::less<>> experiments_;
  std::map<std::string, Participant, std::less<>> participants_;
  std::map<std::string, std::string, std::less<>> participant_by_username_;
  std::map<std::string, TagMap, std::less<>> tag_maps_;
  std::map<std::string, Invitation, std::less<>> invitations_;
  std::map<std::string, Researcher, std::less<>> researchers_;
  std::map<std::string, PictureRecord, std::less<>> pictures_;
  std::map<std::string, ResearcherToken, std::less<>> researcher_tokens_;

  mutable std::mutex sessions_mutex_;
  std::map<std::string, Session, std::less<>> sessions_;
  std::map<std::string, std::string, std::less<>> session_by_participant_;
};

} // namespace emomap
