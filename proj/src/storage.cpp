#include "emomap/storage.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "emomap/crypto.hpp"
#include "emomap/error.hpp"

namespace emomap {

namespace fs = std::filesystem;

std::string_view directory_name(EntityKind kind) noexcept {
  switch (kind) {
    case EntityKind::Experiment: return "experiments";
    case EntityKind::Participant: return "participants";
    case EntityKind::TagMap: return "tag_maps";
    case EntityKind::Invitation: return "invitations";
    case EntityKind::Researcher: return "researchers";
    case EntityKind::Picture: return "pictures";
  }
  return "misc";
}

namespace {

constexpr EntityKind kAllKinds[] = {EntityKind::Experiment, EntityKind::Participant,
                                    EntityKind::TagMap,     EntityKind::Invitation,
                                    EntityKind::Researcher, EntityKind::Picture};

[[noreturn]] void throw_errno(const std::string& what, int err) {
  auto code = (err == ENOSPC || err == EDQUOT) ? ErrorCode::StorageFull : ErrorCode::IoError;
  throw Error(code, what + ": " + std::strerror(err));
}

class Fd {
public:
  Fd(const fs::path& path, int flags, mode_t mode = 0644) : fd_(::open(path.c_str(), flags, mode)) {
    if (fd_ < 0) throw_errno("cannot open " + path.string(), errno);
  }
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;

  void write_all(std::string_view data, const fs::path& path) {
    while (!data.empty()) {
      ssize_t n = ::write(fd_, data.data(), data.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        throw_errno("write to " + path.string() + " failed", errno);
      }
      data.remove_prefix(static_cast<std::size_t>(n));
    }
  }

  void sync(const fs::path& path) {
    if (::fsync(fd_) != 0) throw_errno("fsync of " + path.string() + " failed", errno);
  }

private:
  int fd_;
};

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return std::move(ss).str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  fs::path tmp = path;
  tmp += ".tmp-" + random_hex(6);
  {
    Fd fd(tmp, O_WRONLY | O_CREAT | O_TRUNC);
    fd.write_all(content, tmp);
    fd.sync(tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot rename into " + path.string());
  }
}

bool is_hex_digest(std::string_view s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

json blob_metadata_json(const BlobMetadata& m) {
  json j = {{"media_type", m.media_type},
            {"picture_id", m.picture_id ? json(*m.picture_id) : json(nullptr)},
            {"uploader_id", m.uploader_id ? json(*m.uploader_id) : json(nullptr)},
            {"location", m.location ? json(*m.location) : json(nullptr)},
            {"uploaded_at", timestamp_json(m.uploaded_at)}};
  return j;
}

BlobMetadata blob_metadata_from_json(const json& j) {
  BlobMetadata m;
  j.at("media_type").get_to(m.media_type);
  if (!j.at("picture_id").is_null()) m.picture_id = j.at("picture_id").get<std::string>();
  if (!j.at("uploader_id").is_null()) m.uploader_id = j.at("uploader_id").get<std::string>();
  if (!j.at("location").is_null()) m.location = j.at("location").get<GeoPoint>();
  m.uploaded_at = timestamp_from_json(j.at("uploaded_at"));
  return m;
}

} // namespace

FileStore::FileStore(fs::path root, std::size_t max_blob_bytes)
    : root_(std::move(root)), max_blob_bytes_(max_blob_bytes) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  for (auto kind : kAllKinds) fs::create_directories(root_ / directory_name(kind), ec);
  fs::create_directories(root_ / "blobs", ec);
  if (!fs::is_directory(root_ / "blobs"))
    throw Error(ErrorCode::IoError, "store root " + root_.string() + " is not usable");
}

fs::path FileStore::event_log_path(std::string_view experiment_id) const {
  return root_ / ("events-" + std::string(experiment_id) + ".log");
}

fs::path FileStore::blob_path(std::string_view blob_id) const {
  return root_ / "blobs" / std::string(blob_id);
}

void FileStore::put_document(EntityKind kind, std::string_view id, const json& doc) {
  require_valid_id(id, "document id");
  auto text = doc.dump(2, ' ', false, json::error_handler_t::strict);
  text += '\n';
  write_file_atomic(root_ / directory_name(kind) / (std::string(id) + ".json"), text);
}

std::optional<json> FileStore::get_document(EntityKind kind, std::string_view id) const {
  if (!is_valid_id(id)) return std::nullopt;
  auto path = root_ / directory_name(kind) / (std::string(id) + ".json");
  auto text = read_file(path);
  if (!text) return std::nullopt;
  try {
    return json::parse(*text);
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::CorruptRecord, path.string() + ": " + ex.what());
  }
}

std::vector<std::string> FileStore::list_documents(EntityKind kind) const {
  std::vector<std::string> ids;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(root_ / directory_name(kind), ec)) {
    const auto& p = entry.path();
    if (p.extension() == ".json" && entry.is_regular_file()) ids.push_back(p.stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::mutex& FileStore::log_mutex(std::string_view experiment_id) {
  std::lock_guard lock(logs_guard_);
  auto it = log_mutexes_.find(experiment_id);
  if (it == log_mutexes_.end())
    it = log_mutexes_.emplace(std::string(experiment_id), std::make_unique<std::mutex>()).first;
  return *it->second;
}

std::size_t FileStore::recover_event_log(std::string_view experiment_id) {
  auto path = event_log_path(experiment_id);
  std::size_t removed = 0;
  if (auto text = read_file(path); text && !text->empty() && text->back() != '\n') {
    auto last_newline = text->rfind('\n');
    std::size_t keep = last_newline == std::string::npos ? 0 : last_newline + 1;
    removed = text->size() - keep;
    std::error_code ec;
    fs::resize_file(path, keep, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot truncate " + path.string());
  }
  std::lock_guard lock(logs_guard_);
  recovered_logs_.insert(std::string(experiment_id));
  return removed;
}

void FileStore::append_event(std::string_view experiment_id, const TagEvent& event) {
  require_valid_id(experiment_id, "experiment id");
  std::string line = dump_line(event);
  if (line.find('\n') != std::string::npos)
    throw Error(ErrorCode::SerializationFailure, "event record spans multiple lines");
  line += '\n';

  std::lock_guard lock(log_mutex(experiment_id));
  bool recovered;
  {
    std::lock_guard guard(logs_guard_);
    recovered = recovered_logs_.contains(experiment_id);
  }
  if (!recovered) recover_event_log(experiment_id);

  auto path = event_log_path(experiment_id);
  Fd fd(path, O_WRONLY | O_CREAT | O_APPEND);
  fd.write_all(line, path);
  fd.sync(path);
}

std::vector<TagEvent> FileStore::read_events(std::string_view experiment_id) const {
  std::vector<TagEvent> events;
  if (!is_valid_id(experiment_id)) return events;
  auto path = event_log_path(experiment_id);
  auto text = read_file(path);
  if (!text) return events;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text->size()) {
    auto nl = text->find('\n', pos);
    if (nl == std::string::npos) break; // interrupted append
    ++line_no;
    std::string_view line(text->data() + pos, nl - pos);
    try {
      events.push_back(json::parse(line).get<TagEvent>());
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::CorruptRecord,
                  path.filename().string() + " line " + std::to_string(line_no) + ": " + ex.what());
    }
    pos = nl + 1;
  }
  return events;
}

std::string FileStore::put_blob(std::string_view bytes, const BlobMetadata& meta) {
  if (bytes.size() > max_blob_bytes_)
    throw Error(ErrorCode::ImageTooLarge, "blob of " + std::to_string(bytes.size()) +
                                              " bytes exceeds the " + std::to_string(max_blob_bytes_) +
                                              "-byte limit");
  std::string id = sha256_hex(bytes);
  auto path = blob_path(id);
  if (!fs::exists(path)) write_file_atomic(path, bytes);

  std::string line = dump_line(blob_metadata_json(meta)) + "\n";
  std::lock_guard lock(blob_meta_mutex_);
  fs::path meta_path = path;
  meta_path += ".meta";
  Fd fd(meta_path, O_WRONLY | O_CREAT | O_APPEND);
  fd.write_all(line, meta_path);
  fd.sync(meta_path);
  return id;
}

std::optional<std::string> FileStore::get_blob(std::string_view blob_id) const {
  if (!is_hex_digest(blob_id)) return std::nullopt;
  auto bytes = read_file(blob_path(blob_id));
  if (!bytes) return std::nullopt;
  if (sha256_hex(*bytes) != blob_id)
    throw Error(ErrorCode::CorruptRecord, "blob " + std::string(blob_id) + " does not match its digest");
  return bytes;
}

std::vector<BlobMetadata> FileStore::blob_metadata(std::string_view blob_id) const {
  std::vector<BlobMetadata> out;
  if (!is_hex_digest(blob_id)) return out;
  fs::path meta_path = blob_path(blob_id);
  meta_path += ".meta";
  auto text = read_file(meta_path);
  if (!text) return out;
  std::istringstream in(*text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(blob_metadata_from_json(json::parse(line)));
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::CorruptRecord, meta_path.string() + ": " + ex.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void save(Store& store, const Experiment& e) { store.put_document(EntityKind::Experiment, e.id, e); }
void save(Store& store, const Participant& p) { store.put_document(EntityKind::Participant, p.id, p); }
void save(Store& store, const TagMap& m) { store.put_document(EntityKind::TagMap, m.id, m); }
void save(Store& store, const Invitation& i) { store.put_document(EntityKind::Invitation, i.token, i); }
void save(Store& store, const Researcher& r) { store.put_document(EntityKind::Researcher, r.username, r); }
void save(Store& store, const PictureRecord& p) {
  store.put_document(EntityKind::Picture, p.picture_id, p);
}

template <typename T>
std::optional<T> load(const Store& store, EntityKind kind, std::string_view id) {
  auto doc = store.get_document(kind, id);
  if (!doc) return std::nullopt;
  try {
    return doc->get<T>();
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::CorruptRecord, std::string(directory_name(kind)) + "/" + std::string(id) +
                                              ": " + ex.what());
  }
}

template <typename T>
std::vector<T> load_all(const Store& store, EntityKind kind) {
  std::vector<T> out;
  for (const auto& id : store.list_documents(kind))
    if (auto v = load<T>(store, kind, id)) out.push_back(std::move(*v));
  return out;
}

#define EMOMAP_INSTANTIATE(T)                                                            \
  template std::optional<T> load<T>(const Store&, EntityKind, std::string_view);        \
  template std::vector<T> load_all<T>(const Store&, EntityKind);
EMOMAP_INSTANTIATE(Experiment)
EMOMAP_INSTANTIATE(Participant)
EMOMAP_INSTANTIATE(TagMap)
EMOMAP_INSTANTIATE(Invitation)
EMOMAP_INSTANTIATE(Researcher)
EMOMAP_INSTANTIATE(PictureRecord)
#undef EMOMAP_INSTANTIATE

ExperimentSnapshot load_snapshot(const Store& store, std::string_view experiment_id) {
  ExperimentSnapshot snap;
  auto exp = load<Experiment>(store, EntityKind::Experiment, experiment_id);
  if (!exp) throw Error(ErrorCode::UnknownExperiment, "unknown experiment '" + std::string(experiment_id) + "'");
  snap.experiment = std::move(*exp);

  if (auto map = load<TagMap>(store, EntityKind::TagMap, snap.experiment.tag_map_id))
    snap.tag_map = std::move(*map);
  else if (snap.experiment.tag_map_id == kPlutchikId)
    snap.tag_map = plutchik_wheel();
  else
    throw Error(ErrorCode::UnknownTagMap, "unknown tag map '" + snap.experiment.tag_map_id + "'");

  for (auto& pic : load_all<PictureRecord>(store, EntityKind::Picture))
    if (pic.experiment_id == snap.experiment.id) snap.pictures.push_back(std::move(pic));
  std::sort(snap.pictures.begin(), snap.pictures.end(),
            [](const auto& a, const auto& b) { return a.picture_id < b.picture_id; });

  snap.log = store.read_events(experiment_id);
  snap.effective = effective_events(snap.log);
  return snap;
}

} // namespace emomap
