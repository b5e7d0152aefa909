// emomap: run the tagging service and administer experiments.
//
// Commands work either directly on a store directory (--store) or against a
// running service (--remote). Direct mutations are refused while a `serve`
// process holds the store lock.
//
// Exit codes: 0 success, 1 usage error, 2 domain error, 3 I/O error.

#include <fcntl.h>
#include <pthread.h>
#include <signal.h>
#include <sys/file.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "emomap/aggregation.hpp"
#include "emomap/api.hpp"
#include "emomap/error.hpp"
#include "emomap/platform.hpp"
#include "emomap/storage.hpp"

namespace fs = std::filesystem;
using namespace emomap;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitDomain = 2;
constexpr int kExitIo = 3;

struct Failure {
  int exit_code;
  std::string message;
};

struct Globals {
  std::string store = "./emomap-store";
  std::string remote;
  std::string token;
  std::string user;
  std::string password;
  std::string base_url = "http://localhost:8080";
  std::size_t max_image_bytes = kDefaultMaxImageBytes;
};

// ---------------------------------------------------------------------------
// Store lock

class StoreLock {
public:
  explicit StoreLock(const fs::path& root) {
    std::error_code ec;
    fs::create_directories(root, ec);
    auto path = root / "serve.lock";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw Failure{kExitIo, "cannot open lock file " + path.string()};
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      fd_ = -1;
      throw Failure{kExitIo, "store " + root.string() +
                                 " is locked by a running service; use --remote to go through the API"};
    }
  }
  ~StoreLock() {
    if (fd_ >= 0) ::close(fd_);
  }
  StoreLock(const StoreLock&) = delete;
  StoreLock& operator=(const StoreLock&) = delete;

private:
  int fd_ = -1;
};

PlatformOptions platform_options(const Globals& g) {
  PlatformOptions o;
  o.base_url = g.base_url;
  o.max_image_bytes = g.max_image_bytes;
  return o;
}

std::string read_file_or_fail(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kExitIo, "cannot read " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_output(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
    std::cout.flush();
    return;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Failure{kExitIo, "cannot write " + out_path};
  out << content;
  if (!out) throw Failure{kExitIo, "cannot write " + out_path};
}

Timestamp parse_time_or_fail(const std::string& s, const char* what) {
  auto t = parse_iso8601(s);
  if (!t) throw Failure{kExitUsage, std::string(what) + " must be an ISO-8601 timestamp, got '" + s + "'"};
  return *t;
}

// ---------------------------------------------------------------------------
// Remote mode

class Remote {
public:
  explicit Remote(const Globals& g) : client_(g.remote) {
    client_.set_connection_timeout(10);
    client_.set_read_timeout(120);
    token_ = g.token;
    if (token_.empty()) {
      if (g.user.empty()) throw Failure{kExitUsage, "--remote needs --token or --user/--password"};
      auto res = post("/api/login", json{{"username", g.user}, {"password", g.password}});
      token_ = json::parse(res).at("token").get<std::string>();
    }
  }

  std::string get(const std::string& path) { return check(client_.Get(path, headers())); }

  std::string post(const std::string& path, const json& body) {
    return check(client_.Post(path, headers(), body.dump(), "application/json"));
  }

  std::string post_multipart(const std::string& path, const httplib::MultipartFormDataItems& items) {
    return check(client_.Post(path, headers(), items));
  }

private:
  httplib::Headers headers() const {
    httplib::Headers h;
    if (!token_.empty()) h.emplace("Authorization", "Bearer " + token_);
    return h;
  }

  static std::string check(const httplib::Result& res) {
    if (!res) throw Failure{kExitIo, "request failed: " + httplib::to_string(res.error())};
    if (res->status >= 200 && res->status < 300) return res->body;
    std::string code = "http_" + std::to_string(res->status), message = res->body;
    try {
      auto j = json::parse(res->body);
      code = j.at("error").at("code").get<std::string>();
      message = j.at("error").value("message", message);
    } catch (const std::exception&) {
    }
    throw Failure{res->status >= 500 ? kExitIo : kExitDomain, code + ": " + message};
  }

  httplib::Client client_;
  std::string token_;
};

// ---------------------------------------------------------------------------
// serve

sigset_t termination_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  return set;
}

int serve(const Globals& g, const std::string& bind_address, const std::string& static_dir) {
  auto colon = bind_address.rfind(':');
  if (colon == std::string::npos) throw Failure{kExitUsage, "--bind must be HOST:PORT"};
  std::string host = bind_address.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(bind_address.substr(colon + 1));
  } catch (const std::exception&) {
    throw Failure{kExitUsage, "--bind port must be a number"};
  }

  // the signal thread owns SIGINT/SIGTERM; block them before any other thread starts
  sigset_t signals = termination_signals();
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  StoreLock lock(g.store);
  auto store = std::make_shared<FileStore>(g.store, g.max_image_bytes);
  for (const auto& id : store->list_documents(EntityKind::Experiment))
    if (auto removed = store->recover_event_log(id))
      std::cerr << "recovered events-" << id << ".log: dropped " << removed << " bytes of a partial record\n";

  Platform platform(store, platform_options(g));
  ApiServer api(platform);
  if (!static_dir.empty()) api.mount_static(static_dir);
  int bound = 0;
  try {
    bound = api.bind(host, port);
  } catch (const Error& e) {
    throw Failure{kExitIo, e.what()};
  }

  std::thread signal_thread([&api, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    api.stop();
  });

  std::cout << "emomap listening on http://" << host << ":" << bound << std::endl;
  api.listen();

  // listen() also returns if the server failed; wake the signal thread
  pthread_kill(signal_thread.native_handle(), SIGTERM);
  signal_thread.join();
  std::cerr << "emomap stopped" << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------
// Direct-store helpers

struct Direct {
  explicit Direct(const Globals& g)
      : lock(g.store),
        store(std::make_shared<FileStore>(g.store, g.max_image_bytes)),
        platform(store, platform_options(g)) {}
  StoreLock lock;
  std::shared_ptr<FileStore> store;
  Platform platform;
};

std::string export_direct(const Globals& g, const std::string& experiment_id) {
  FileStore store(g.store, g.max_image_bytes);
  return export_csv(load_snapshot(store, experiment_id));
}

std::string map_direct(const Globals& g, const std::string& experiment_id, double cell_size) {
  FileStore store(g.store, g.max_image_bytes);
  auto snap = load_snapshot(store, experiment_id);
  return emotion_map_document(grid_aggregate(snap.effective, snap.tag_map, cell_size));
}

std::string format_cell_size(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"emomap: emotion tagging experiments over a Plutchik-style wheel"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--store", g.store, "Store root directory")->envname("EMOMAP_STORE");
  app.add_option("--remote", g.remote, "Service base URL; commands go through the HTTP API")->envname("EMOMAP_REMOTE");
  app.add_option("--token", g.token, "Researcher bearer token for --remote")->envname("EMOMAP_TOKEN");
  app.add_option("--user", g.user, "Researcher username for --remote")->envname("EMOMAP_USER");
  app.add_option("--password", g.password, "Researcher password for --remote")->envname("EMOMAP_PASSWORD");
  app.add_option("--base-url", g.base_url, "Public base URL used in invitation links")->envname("EMOMAP_BASE_URL");
  app.add_option("--max-image-bytes", g.max_image_bytes, "Upload size limit in bytes")
      ->envname("EMOMAP_MAX_IMAGE_BYTES");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  std::string bind_address = "127.0.0.1:8080";
  std::string static_dir;
  serve_cmd->add_option("--bind", bind_address, "HOST:PORT to listen on (port 0 picks one)")->envname("EMOMAP_BIND");
  serve_cmd->add_option("--static-dir", static_dir, "Directory of UI assets served at /");

  // researcher / participant / tag map
  auto* researcher_cmd = app.add_subcommand("researcher", "Researcher accounts")->require_subcommand(1);
  auto* researcher_add = researcher_cmd->add_subcommand("add", "Create a researcher account");
  std::string r_user, r_password;
  researcher_add->add_option("--username", r_user)->required();
  researcher_add->add_option("--password", r_password)->required();

  auto* participant_cmd = app.add_subcommand("participant", "Participants")->require_subcommand(1);
  auto* participant_add = participant_cmd->add_subcommand("add", "Create a participant");
  std::string p_id, p_name, p_user, p_password, p_hand = "right";
  participant_add->add_option("--id", p_id);
  participant_add->add_option("--name", p_name);
  participant_add->add_option("--username", p_user);
  participant_add->add_option("--password", p_password);
  participant_add->add_option("--handedness", p_hand)->check(CLI::IsMember({"right", "left"}, CLI::ignore_case));

  auto* tagmap_cmd = app.add_subcommand("tagmap", "Tag maps")->require_subcommand(1);
  auto* tagmap_add = tagmap_cmd->add_subcommand("add", "Register a tag map document");
  std::string tagmap_file;
  tagmap_add->add_option("--file", tagmap_file)->required()->check(CLI::ExistingFile);
  auto* tagmap_list = tagmap_cmd->add_subcommand("list", "List tag map ids");

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "Experiments")->require_subcommand(1);
  std::string e_id, e_participant, e_out, e_expires;

  auto* create = exp_cmd->add_subcommand("create", "Create a DRAFT experiment and print its id");
  std::string c_mode, c_start, c_finish, c_tag_map = std::string(kPlutchikId), c_ordering = "fixed", c_locale = "en";
  std::vector<std::string> c_pictures, c_participants;
  create->add_option("--id", e_id);
  create->add_option("--mode", c_mode)->required()->check(CLI::IsMember({"curated", "field"}, CLI::ignore_case));
  create->add_option("--start", c_start)->required();
  create->add_option("--finish", c_finish)->required();
  create->add_option("--tag-map", c_tag_map);
  create->add_option("--ordering", c_ordering)
      ->check(CLI::IsMember({"fixed", "random", "random_per_participant"}, CLI::ignore_case));
  create->add_option("--pictures", c_pictures)->delimiter(',');
  create->add_option("--participants", c_participants)->delimiter(',');
  create->add_option("--locale", c_locale);

  auto* list = exp_cmd->add_subcommand("list", "List experiments");

  auto* activate = exp_cmd->add_subcommand("activate", "DRAFT -> ACTIVE");
  activate->add_option("--experiment", e_id)->required();
  auto* finish = exp_cmd->add_subcommand("finish", "ACTIVE -> FINISHED");
  finish->add_option("--experiment", e_id)->required();

  auto* add_pictures = exp_cmd->add_subcommand("add-pictures", "Upload researcher pictures (JPEG/PNG)");
  std::vector<std::string> picture_files, picture_ids;
  add_pictures->add_option("--experiment", e_id)->required();
  add_pictures->add_option("--picture-id", picture_ids, "Explicit ids, matched to files by position")
      ->allow_extra_args(false);
  add_pictures->add_option("files", picture_files)->required()->check(CLI::ExistingFile);

  auto* invite = exp_cmd->add_subcommand("invite", "Mint an invitation and print its URL (the QR payload)");
  invite->add_option("--experiment", e_id)->required();
  invite->add_option("--participant", e_participant)->required();
  invite->add_option("--expires", e_expires, "ISO-8601 expiry");

  auto* export_cmd = exp_cmd->add_subcommand("export", "Write the CSV export");
  export_cmd->add_option("--experiment", e_id)->required();
  export_cmd->add_option("--out", e_out, "Output file (default stdout)");

  auto* map_cmd = exp_cmd->add_subcommand("map", "Write the emotion map cell document");
  double cell_size = 0.01;
  map_cmd->add_option("--experiment", e_id)->required();
  map_cmd->add_option("--cell-size", cell_size, "Cell size in degrees")->required();
  map_cmd->add_option("--out", e_out, "Output file (default stdout)");

  auto* order_cmd = exp_cmd->add_subcommand("order", "Print a participant's picture order");
  order_cmd->add_option("--experiment", e_id)->required();
  order_cmd->add_option("--participant", e_participant)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  const bool remote = !g.remote.empty();
  try {
    if (serve_cmd->parsed()) return serve(g, bind_address, static_dir);

    if (researcher_add->parsed()) {
      if (remote) throw Failure{kExitUsage, "researcher accounts are managed on the store directly"};
      Direct d(g);
      d.platform.add_researcher(r_user, r_password);
      std::cout << r_user << "\n";
      return 0;
    }

    if (participant_add->parsed()) {
      json body = {{"display_name", p_name}, {"handedness", p_hand}};
      if (!p_id.empty()) body["id"] = p_id;
      if (!p_user.empty()) body["username"] = p_user;
      if (!p_password.empty()) body["password"] = p_password;
      if (remote) {
        Remote r(g);
        std::cout << json::parse(r.post("/api/participants", body)).at("id").get<std::string>() << "\n";
      } else {
        Direct d(g);
        ParticipantInput in;
        if (!p_id.empty()) in.id = p_id;
        in.display_name = p_name;
        if (!p_user.empty()) in.username = p_user;
        if (!p_password.empty()) in.password = p_password;
        in.handedness = *parse_handedness(p_hand);
        std::cout << d.platform.add_participant(in).id << "\n";
      }
      return 0;
    }

    if (tagmap_add->parsed()) {
      auto doc = json::parse(read_file_or_fail(tagmap_file));
      if (remote) {
        Remote r(g);
        r.post("/api/tag-maps", doc);
      } else {
        Direct d(g);
        d.platform.register_tag_map(doc.get<TagMap>());
      }
      std::cout << doc.at("id").get<std::string>() << "\n";
      return 0;
    }
    if (tagmap_list->parsed()) {
      if (remote) {
        Remote r(g);
        for (const auto& m : json::parse(r.get("/api/tag-maps")).at("tag_maps")) std::cout << m.at("id").get<std::string>() << "\n";
      } else {
        FileStore store(g.store);
        std::cout << kPlutchikId << "\n";
        for (const auto& id : store.list_documents(EntityKind::TagMap))
          if (id != kPlutchikId) std::cout << id << "\n";
      }
      return 0;
    }

    if (create->parsed()) {
      json body = {{"mode", c_mode},
                   {"start_time", format_iso8601(parse_time_or_fail(c_start, "--start"))},
                   {"finish_time", format_iso8601(parse_time_or_fail(c_finish, "--finish"))},
                   {"tag_map_id", c_tag_map},
                   {"ordering", c_ordering},
                   {"picture_ids", c_pictures},
                   {"participant_ids", c_participants},
                   {"locale_default", c_locale}};
      if (!e_id.empty()) body["id"] = e_id;
      if (remote) {
        Remote r(g);
        std::cout << json::parse(r.post("/api/experiments", body)).at("id").get<std::string>() << "\n";
      } else {
        Direct d(g);
        ExperimentDraft draft;
        if (!e_id.empty()) draft.id = e_id;
        draft.mode = *parse_mode(c_mode);
        draft.start_time = parse_time_or_fail(c_start, "--start");
        draft.finish_time = parse_time_or_fail(c_finish, "--finish");
        draft.tag_map_id = c_tag_map;
        draft.ordering = *parse_ordering(c_ordering);
        draft.picture_ids = c_pictures;
        draft.participant_ids = {c_participants.begin(), c_participants.end()};
        draft.locale_default = c_locale;
        std::cout << d.platform.create_experiment(draft).id << "\n";
      }
      return 0;
    }

    if (list->parsed()) {
      std::vector<Experiment> experiments;
      if (remote) {
        Remote r(g);
        for (const auto& j : json::parse(r.get("/api/experiments")).at("experiments"))
          experiments.push_back(j.get<Experiment>());
      } else {
        FileStore store(g.store);
        experiments = load_all<Experiment>(store, EntityKind::Experiment);
      }
      for (const auto& e : experiments)
        std::cout << e.id << '\t' << to_string(e.mode) << '\t' << to_string(e.state) << '\t'
                  << format_iso8601(e.start_time) << '\t' << format_iso8601(e.finish_time) << '\t'
                  << e.picture_ids.size() << " pictures\t" << e.participant_ids.size() << " participants\n";
      return 0;
    }

    if (activate->parsed() || finish->parsed()) {
      const bool is_activate = activate->parsed();
      Experiment e;
      if (remote) {
        Remote r(g);
        e = json::parse(r.post("/api/experiments/" + e_id + (is_activate ? "/activate" : "/finish"), json::object()))
                .get<Experiment>();
      } else {
        Direct d(g);
        e = is_activate ? d.platform.activate(e_id) : d.platform.finish(e_id);
      }
      std::cout << e.id << ' ' << to_string(e.state) << "\n";
      return 0;
    }

    if (add_pictures->parsed()) {
      if (remote) {
        Remote r(g);
        httplib::MultipartFormDataItems items;
        for (std::size_t i = 0; i < picture_files.size(); ++i) {
          items.push_back({"image", read_file_or_fail(picture_files[i]),
                           fs::path(picture_files[i]).filename().string(), "application/octet-stream"});
          items.push_back({"picture_id", i < picture_ids.size() ? picture_ids[i] : "", "", ""});
        }
        for (const auto& p : json::parse(r.post_multipart("/api/experiments/" + e_id + "/pictures", items)).at("pictures"))
          std::cout << p.at("picture_id").get<std::string>() << "\n";
      } else {
        Direct d(g);
        for (std::size_t i = 0; i < picture_files.size(); ++i) {
          std::optional<std::string> id;
          if (i < picture_ids.size()) id = picture_ids[i];
          std::cout << d.platform.add_curated_picture(e_id, read_file_or_fail(picture_files[i]), id).picture_id
                    << "\n";
        }
      }
      return 0;
    }

    if (invite->parsed()) {
      std::optional<Timestamp> expires;
      if (!e_expires.empty()) expires = parse_time_or_fail(e_expires, "--expires");
      if (remote) {
        Remote r(g);
        json body = {{"experiment_id", e_id}, {"participant_id", e_participant}};
        if (expires) body["expires_at"] = format_iso8601(*expires);
        std::cout << json::parse(r.post("/api/invitations", body)).at("url_payload").get<std::string>() << "\n";
      } else {
        Direct d(g);
        std::cout << d.platform.invite(e_id, e_participant, expires).url_payload << "\n";
      }
      return 0;
    }

    if (export_cmd->parsed()) {
      std::string csv;
      if (remote) {
        Remote r(g);
        csv = r.get("/api/experiments/" + e_id + "/export.csv");
      } else {
        csv = export_direct(g, e_id);
      }
      write_output(e_out, csv);
      return 0;
    }

    if (map_cmd->parsed()) {
      std::string doc;
      if (remote) {
        Remote r(g);
        doc = r.get("/api/experiments/" + e_id + "/map?cell_size=" + format_cell_size(cell_size));
      } else {
        doc = map_direct(g, e_id, cell_size);
      }
      write_output(e_out, doc);
      return 0;
    }

    if (order_cmd->parsed()) {
      Experiment e;
      if (remote) {
        Remote r(g);
        e = json::parse(r.get("/api/experiments/" + e_id)).get<Experiment>();
      } else {
        FileStore store(g.store);
        auto loaded = load<Experiment>(store, EntityKind::Experiment, e_id);
        if (!loaded) throw Error(ErrorCode::UnknownExperiment, "unknown experiment '" + e_id + "'");
        e = *loaded;
      }
      for (const auto& id : picture_order(e, e_participant)) std::cout << id << "\n";
      return 0;
    }
  } catch (const Failure& f) {
    std::cerr << "emomap: " << f.message << "\n";
    return f.exit_code;
  } catch (const Error& e) {
    std::cerr << "emomap: " << code_name(e.code()) << ": " << e.what() << "\n";
    return is_io_error(e.code()) ? kExitIo : kExitDomain;
  } catch (const json::exception& e) {
    std::cerr << "emomap: malformed document: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "emomap: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
