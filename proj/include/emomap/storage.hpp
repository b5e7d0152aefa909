#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "emomap/experiment.hpp"
#include "emomap/image.hpp"
#include "emomap/serialization.hpp"

namespace emomap {

enum class EntityKind { Experiment, Participant, TagMap, Invitation, Researcher, Picture };

std::string_view directory_name(EntityKind kind) noexcept;

/// Sidecar record written for every upload of a blob.
struct BlobMetadata {
  std::string media_type;
  std::optional<std::string> picture_id;
  std::optional<std::string> uploader_id;
  std::optional<GeoPoint> location;
  Timestamp uploaded_at{};
  friend bool operator==(const BlobMetadata&, const BlobMetadata&) = default;
};

/// Persistence contract. Implementations must allow concurrent appends to
/// different experiment logs and serialize appends to the same log.
class Store {
public:
  virtual ~Store() = default;

  virtual void put_document(EntityKind kind, std::string_view id, const json& doc) = 0;
  virtual std::optional<json> get_document(EntityKind kind, std::string_view id) const = 0;
  virtual std::vector<std::string> list_documents(EntityKind kind) const = 0;

  /// Returns once the record is durable.
  virtual void append_event(std::string_view experiment_id, const TagEvent& event) = 0;
  /// Complete records in append order; a trailing partial line is ignored.
  virtual std::vector<TagEvent> read_events(std::string_view experiment_id) const = 0;

  virtual std::string put_blob(std::string_view bytes, const BlobMetadata& meta) = 0;
  virtual std::optional<std::string> get_blob(std::string_view blob_id) const = 0;
  virtual std::vector<BlobMetadata> blob_metadata(std::string_view blob_id) const = 0;
};

// Layout under the root directory:
//   experiments/<id>.json  participants/<id>.json  tag_maps/<id>.json
//   invitations/<token>.json  researchers/<username>.json  pictures/<id>.json
//   events-<experiment_id>.log          one JSON record per line
//   blobs/<sha256-hex>                  content
//   blobs/<sha256-hex>.meta             one BlobMetadata record per upload
class FileStore final : public Store {
public:
  explicit FileStore(std::filesystem::path root, std::size_t max_blob_bytes = kDefaultMaxImageBytes);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path event_log_path(std::string_view experiment_id) const;
  std::filesystem::path blob_path(std::string_view blob_id) const;

  void put_document(EntityKind kind, std::string_view id, const json& doc) override;
  std::optional<json> get_document(EntityKind kind, std::string_view id) const override;
  std::vector<std::string> list_documents(EntityKind kind) const override;

  void append_event(std::string_view experiment_id, const TagEvent& event) override;
  std::vector<TagEvent> read_events(std::string_view experiment_id) const override;

  /// Truncates a trailing partial line left by an interrupted append.
  /// Returns the number of bytes removed.
  std::size_t recover_event_log(std::string_view experiment_id);

  std::string put_blob(std::string_view bytes, const BlobMetadata& meta) override;
  std::optional<std::string> get_blob(std::string_view blob_id) const override;
  std::vector<BlobMetadata> blob_metadata(std::string_view blob_id) const override;

private:
  std::mutex& log_mutex(std::string_view experiment_id);

  std::filesystem::path root_;
  std::size_t max_blob_bytes_;

  std::mutex logs_guard_;
  std::map<std::string, std::unique_ptr<std::mutex>, std::less<>> log_mutexes_;
  std::set<std::string, std::less<>> recovered_logs_;
  std::mutex blob_meta_mutex_;
};

// Typed accessors over the document interface.
void save(Store& store, const Experiment& e);
void save(Store& store, const Participant& p);
void save(Store& store, const TagMap& m);
void save(Store& store, const Invitation& i);
void save(Store& store, const Researcher& r);
void save(Store& store, const PictureRecord& p);

template <typename T>
std::optional<T> load(const Store& store, EntityKind kind, std::string_view id);

template <typename T>
std::vector<T> load_all(const Store& store, EntityKind kind);

/// Replays the entity documents and the event log of one experiment and
/// applies latest-wins resolution. Throws Error(UnknownExperiment) or
/// Error(CorruptRecord).
ExperimentSnapshot load_snapshot(const Store& store, std::string_view experiment_id);

} // namespace emomap
