#include <gtest/gtest.h>
#include <httplib.h>

#include "emomap/aggregation.hpp"
#include "emomap/experiment.hpp"
#include "emomap/serialization.hpp"
#include "test_support.hpp"

using namespace emomap;

namespace {

class CliTest : public ::testing::Test {
protected:
  testkit::TempDir store;
  testkit::TempDir files;

  testkit::CommandResult run(std::vector<std::string> args) {
    args.insert(args.begin(), {EMOMAP_CLI_PATH, "--store", store.str(), "--base-url", "http://emo.test"});
    return testkit::run_command(args);
  }

  static std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
  }

  std::string picture(const std::string& name, const std::string& bytes) {
    auto path = files.path() / name;
    testkit::write_text(path, bytes);
    return path.string();
  }

  /// Creates an ACTIVE curated experiment "cur" with three pictures and one
  /// participant "p-1".
  void seed_curated() {
    ASSERT_EQ(run({"participant", "add", "--id", "p-1", "--name", "Ala"}).exit_code, 0);
    ASSERT_EQ(trim(run({"experiment", "create", "--id", "cur", "--mode", "curated", "--start",
                        "2020-01-01T00:00:00Z", "--finish", "2099-01-01T00:00:00Z", "--participants", "p-1"})
                       .out),
              "cur");
    auto added = run({"experiment", "add-pictures", "--experiment", "cur", "--picture-id", "a", "--picture-id", "b",
                      "--picture-id", "c", picture("a.png", testkit::tiny_png("a")),
                      picture("b.png", testkit::tiny_png("b")), picture("c.jpg", testkit::fake_jpeg(300))});
    ASSERT_EQ(added.exit_code, 0) << added.err;
    ASSERT_EQ(added.out, "a\nb\nc\n");
    ASSERT_EQ(run({"experiment", "activate", "--experiment", "cur"}).exit_code, 0);
  }
};

} // namespace

TEST_F(CliTest, CreatePrintsGeneratedId) {
  auto r = run({"experiment", "create", "--mode", "field", "--start", "2026-01-01T00:00:00Z", "--finish",
                "2026-02-01T00:00:00Z"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  auto id = trim(r.out);
  EXPECT_FALSE(id.empty());
  EXPECT_TRUE(is_valid_id(id));
  auto list = run({"experiment", "list"});
  EXPECT_NE(list.out.find(id + "\tFIELD\tDRAFT"), std::string::npos) << list.out;
}

TEST_F(CliTest, InvitePrintsUrlWithStrongToken) {
  seed_curated();
  auto r = run({"experiment", "invite", "--experiment", "cur", "--participant", "p-1"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  auto url = trim(r.out);
  const std::string prefix = "http://emo.test/join?token=";
  ASSERT_EQ(url.rfind(prefix, 0), 0u) << url;
  auto token = url.substr(prefix.size());
  EXPECT_GE(token.size(), 22u);
  for (char c : token) EXPECT_TRUE(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') << url;
}

TEST_F(CliTest, OrderIsDeterministic) {
  seed_curated();
  auto a = run({"experiment", "order", "--experiment", "cur", "--participant", "p-1"});
  auto b = run({"experiment", "order", "--experiment", "cur", "--participant", "p-1"});
  EXPECT_EQ(a.out, "a\nb\nc\n");
  EXPECT_EQ(a.out, b.out);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({}).exit_code, 1);
  EXPECT_EQ(run({"experiment", "create", "--mode", "hybrid", "--start", "x", "--finish", "y"}).exit_code, 1);
  EXPECT_EQ(run({"no-such-command"}).exit_code, 1);
  EXPECT_EQ(run({"experiment", "invite", "--experiment", "nope"}).exit_code, 1);

  auto domain = run({"experiment", "activate", "--experiment", "missing"});
  EXPECT_EQ(domain.exit_code, 2);
  EXPECT_NE(domain.err.find("unknown_experiment"), std::string::npos) << domain.err;

  auto schedule = run({"experiment", "create", "--mode", "curated", "--start", "2026-02-01T00:00:00Z", "--finish",
                       "2026-01-01T00:00:00Z"});
  EXPECT_EQ(schedule.exit_code, 2);
  EXPECT_NE(schedule.err.find("invalid_schedule"), std::string::npos);

  EXPECT_EQ(run({"--help"}).exit_code, 0);
}

TEST_F(CliTest, TagMapAddAndList) {
  json doc = plutchik_wheel();
  doc["id"] = "rotated";
  doc["sector_offset_deg"] = 22.5;
  auto path = files.path() / "rotated.json";
  testkit::write_text(path, doc.dump());
  auto added = run({"tagmap", "add", "--file", path.string()});
  ASSERT_EQ(added.exit_code, 0) << added.err;
  EXPECT_EQ(run({"tagmap", "list"}).out, "plutchik\nrotated\n");

  doc["band_boundaries"] = {0.9, 0.1};
  testkit::write_text(path, doc.dump());
  auto invalid = run({"tagmap", "add", "--file", path.string()});
  EXPECT_EQ(invalid.exit_code, 2);
  EXPECT_NE(invalid.err.find("invalid_tag_map"), std::string::npos);
}

TEST_F(CliTest, StoreLockRefusesWritesWhileServing) {
  testkit::ServerProcess server(EMOMAP_CLI_PATH, {"--store", store.str(), "serve", "--bind", "127.0.0.1:0"});
  auto r = run({"participant", "add", "--id", "p-9"});
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_NE(r.err.find("--remote"), std::string::npos) << r.err;
  EXPECT_EQ(server.terminate(), 0);
  EXPECT_EQ(run({"participant", "add", "--id", "p-9"}).exit_code, 0);
}

TEST_F(CliTest, ServeOnOccupiedPortFails) {
  testkit::ServerProcess first(EMOMAP_CLI_PATH, {"--store", store.str(), "serve", "--bind", "127.0.0.1:0"});
  testkit::TempDir other;
  auto r = testkit::run_command({EMOMAP_CLI_PATH, "--store", other.str(), "serve", "--bind",
                                 "127.0.0.1:" + std::to_string(first.port())});
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_NE(r.err.find("cannot bind"), std::string::npos) << r.err;
}

TEST_F(CliTest, ResearcherAddRefusedRemotely) {
  auto r = testkit::run_command({EMOMAP_CLI_PATH, "--remote", "http://127.0.0.1:1", "researcher", "add",
                                 "--username", "x", "--password", "y"});
  EXPECT_EQ(r.exit_code, 1);
}

TEST_F(CliTest, RemoteExportMatchesApiAndDirectExport) {
  seed_curated();
  ASSERT_EQ(run({"researcher", "add", "--username", "admin", "--password", "pw"}).exit_code, 0);
  auto invite = trim(run({"experiment", "invite", "--experiment", "cur", "--participant", "p-1"}).out);
  auto token = invite.substr(invite.find('=') + 1);

  testkit::TempDir out;
  std::string direct_before;
  {
    testkit::ServerProcess server(EMOMAP_CLI_PATH, {"--store", store.str(), "serve", "--bind", "127.0.0.1:0"});
    httplib::Client c("127.0.0.1", server.port());
    auto s = c.Post("/api/session", json{{"token", token}}.dump(), "application/json");
    ASSERT_EQ(s->status, 200);
    httplib::Headers participant{{"Authorization", "Bearer " + json::parse(s->body)["session_token"].get<std::string>()}};
    int i = 0;
    for (const char* pic : {"a", "b", "c"}) {
      json tag = {{"picture_id", pic}, {"x", 0.3 * (i - 1)}, {"y", 0.4 + 0.1 * i}};
      ASSERT_EQ(c.Post("/api/tags", participant, tag.dump(), "application/json")->status, 201);
      ++i;
    }

    auto login = c.Post("/api/login", json{{"username", "admin"}, {"password", "pw"}}.dump(), "application/json");
    httplib::Headers researcher{
        {"Authorization", "Bearer " + json::parse(login->body)["token"].get<std::string>()}};
    auto api_csv = c.Get("/api/experiments/cur/export.csv", researcher)->body;

    auto remote = testkit::run_command({EMOMAP_CLI_PATH, "--remote", server.base_url(), "--user", "admin",
                                        "--password", "pw", "experiment", "export", "--experiment", "cur", "--out",
                                        (out.path() / "remote.csv").string()});
    ASSERT_EQ(remote.exit_code, 0) << remote.err;
    EXPECT_EQ(testkit::read_text(out.path() / "remote.csv"), api_csv);
    EXPECT_EQ(parse_csv(api_csv).size(), 3u);
    direct_before = api_csv;

    auto remote_map = testkit::run_command({EMOMAP_CLI_PATH, "--remote", server.base_url(), "--user", "admin",
                                            "--password", "pw", "experiment", "map", "--experiment", "cur",
                                            "--cell-size", "0.5"});
    EXPECT_EQ(remote_map.exit_code, 0) << remote_map.err;
    EXPECT_EQ(json::parse(remote_map.out)["cells"].size(), 0u);
    EXPECT_EQ(server.terminate(), 0);
  }
  auto direct = run({"experiment", "export", "--experiment", "cur", "--out", (out.path() / "direct.csv").string()});
  ASSERT_EQ(direct.exit_code, 0) << direct.err;
  EXPECT_EQ(testkit::read_text(out.path() / "direct.csv"), direct_before);
}

TEST_F(CliTest, RemoteBadCredentials) {
  ASSERT_EQ(run({"researcher", "add", "--username", "admin", "--password", "pw"}).exit_code, 0);
  testkit::ServerProcess server(EMOMAP_CLI_PATH, {"--store", store.str(), "serve", "--bind", "127.0.0.1:0"});
  auto r = testkit::run_command({EMOMAP_CLI_PATH, "--remote", server.base_url(), "--user", "admin", "--password",
                                 "nope", "experiment", "list"});
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("bad_credentials"), std::string::npos) << r.err;
}
