#pragma once

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "emomap/crypto.hpp"
#include "emomap/platform.hpp"
#include "emomap/time.hpp"

namespace emomap::testkit {

class TempDir {
public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() / ("emomap-test-" + random_hex(8));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

private:
  std::filesystem::path path_;
};

/// Settable clock for schedule and expiry tests.
class ManualClock {
public:
  explicit ManualClock(Timestamp start) : ms_(start.time_since_epoch().count()) {}
  Timestamp now() const { return Timestamp{std::chrono::milliseconds{ms_.load()}}; }
  void set(Timestamp t) { ms_ = t.time_since_epoch().count(); }
  void advance(std::chrono::milliseconds d) { ms_ += d.count(); }
  Clock as_clock() {
    return [this] { return now(); };
  }

private:
  std::atomic<long long> ms_;
};

inline Timestamp at(const char* iso) {
  auto t = parse_iso8601(iso);
  if (!t) throw std::invalid_argument(iso);
  return *t;
}

/// Smallest byte string that passes the PNG framing check; `salt` varies the
/// content hash.
inline std::string tiny_png(std::string_view salt = "") {
  std::string b("\x89PNG\r\n\x1a\n", 8);
  b += std::string("\x00\x00\x00\x0d", 4) + "IHDR";
  b += std::string("\x00\x00\x00\x01\x00\x00\x00\x01\x08\x02\x00\x00\x00", 13);
  b += std::string("\x90\x77\x53\xde", 4);
  b += std::string(salt);
  return b;
}

/// JPEG framing (SOI ... EOI) padded to `size` bytes.
inline std::string fake_jpeg(std::size_t size, unsigned char fill = 0x42) {
  if (size < 8) size = 8;
  std::string b(size, static_cast<char>(fill));
  b[0] = '\xFF';
  b[1] = '\xD8';
  b[2] = '\xFF';
  b[3] = '\xE0';
  b[size - 2] = '\xFF';
  b[size - 1] = '\xD9';
  return b;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& p, std::string_view text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

struct CommandResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Runs `argv` to completion capturing stdout and stderr.
inline CommandResult run_command(const std::vector<std::string>& argv,
                                 const std::vector<std::string>& env_extra = {}) {
  TempDir scratch;
  auto out_path = scratch.path() / "out", err_path = scratch.path() / "err";
  pid_t pid = fork();
  if (pid == 0) {
    FILE* o = std::freopen(out_path.c_str(), "w", stdout);
    FILE* e = std::freopen(err_path.c_str(), "w", stderr);
    (void)o;
    (void)e;
    for (const auto& kv : env_extra) putenv(const_cast<char*>(kv.c_str()));
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    execv(args[0], args.data());
    _exit(127);
  }
  int status = 0;
  waitpid(pid, &status, 0);
  CommandResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text(out_path);
  r.err = read_text(err_path);
  return r;
}

/// A background `emomap serve` process. The constructor waits for the
/// "listening" line and records the bound port.
class ServerProcess {
public:
  ServerProcess(const std::string& binary, const std::vector<std::string>& args) {
    int fds[2];
    if (pipe(fds) != 0) throw std::runtime_error("pipe failed");
    pid_ = fork();
    if (pid_ == 0) {
      dup2(fds[1], STDOUT_FILENO);
      close(fds[0]);
      close(fds[1]);
      std::vector<std::string> full{binary};
      full.insert(full.end(), args.begin(), args.end());
      std::vector<char*> argv;
      for (const auto& a : full) argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      execv(argv[0], argv.data());
      _exit(127);
    }
    close(fds[1]);
    out_ = fdopen(fds[0], "r");
    char line[512];
    while (std::fgets(line, sizeof line, out_)) {
      std::string s(line);
      first_line_ = s;
      auto pos = s.find("listening on http://");
      if (pos != std::string::npos) {
        auto colon = s.rfind(':');
        port_ = std::stoi(s.substr(colon + 1));
        break;
      }
    }
    if (port_ <= 0) {
      wait_exit();
      throw std::runtime_error("server did not start: " + first_line_);
    }
  }

  ~ServerProcess() {
    if (pid_ > 0 && !exited_) {
      kill(pid_, SIGKILL);
      wait_exit();
    }
    if (out_) std::fclose(out_);
  }

  ServerProcess(const ServerProcess&) = delete;
  ServerProcess& operator=(const ServerProcess&) = delete;

  int port() const { return port_; }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  void kill_hard() {
    kill(pid_, SIGKILL);
    wait_exit();
  }

  int terminate() {
    kill(pid_, SIGTERM);
    return wait_exit();
  }

  int wait_exit() {
    int status = 0;
    waitpid(pid_, &status, 0);
    exited_ = true;
    exit_status_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    return exit_status_;
  }

private:
  pid_t pid_ = -1;
  FILE* out_ = nullptr;
  int port_ = -1;
  bool exited_ = false;
  int exit_status_ = -1;
  std::string first_line_;
};

} // namespace emomap::testkit
