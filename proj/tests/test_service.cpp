#include <doctest.h>
#include <httplib.h>

#include <set>
#include <thread>

#include "fixture_study.hpp"
#include "support.hpp"
#include "xaihealth/service.hpp"
#include "xaihealth/study.hpp"

using namespace xaihealth;
using nlohmann::json;

namespace {

// Keys that would leak ground truth or trust results to a rater.
const std::set<std::string> kForbidden{"label",  "labels", "correct", "correctness", "is_correct", "ground_truth",
                                       "gt",     "precision", "recall", "f1", "tp", "fp", "fn", "tn",
                                       "accuracy", "metrics", "confusion", "trusted"};

void check_no_leaks(const json& j, const std::string& where) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      INFO(where << ": key " << it.key());
      CHECK(kForbidden.count(it.key()) == 0);
      check_no_leaks(it.value(), where);
    }
  } else if (j.is_array()) {
    for (const auto& e : j) check_no_leaks(e, where);
  }
}

struct Server {
  explicit Server(const std::filesystem::path& dir) : service(dir) {
    port = service.bind("127.0.0.1", 0);
    thread = std::thread([this] { service.run(); });
  }
  ~Server() {
    service.stop();
    thread.join();
  }
  TrustService service;
  int port = 0;
  std::thread thread;
};

struct Api {
  explicit Api(int port) : client("127.0.0.1", port) {}
  httplib::Client client;

  std::pair<int, json> get(const std::string& path) {
    auto res = client.Get(path);
    REQUIRE(res);
    auto body = json::parse(res->body, nullptr, false);
    check_no_leaks(body, path);
    return {res->status, body};
  }
  std::pair<int, json> post(const std::string& path, const json& body) {
    auto res = client.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    auto parsed = json::parse(res->body, nullptr, false);
    check_no_leaks(parsed, path);
    return {res->status, parsed};
  }
};

std::filesystem::path study_in_human_phase(const std::filesystem::path& root) {
  const auto dir = testing::make_fixture_study(root);
  auto study = Study::open(dir);
  study.sync_altai_answers();
  study.advance(study.run_current_phase());
  study.advance(study.run_current_phase());
  REQUIRE(study.state().phase == Phase::HumanCentred);
  return dir;
}

}  // namespace

TEST_CASE("sessions are refused before HumanCentred") {
  testing::TempDir tmp;
  const auto dir = testing::make_fixture_study(tmp.path());
  {
    auto study = Study::open(dir);
    study.sync_altai_answers();
    study.advance(study.run_current_phase());  // now MachineCentred
  }
  Server server(dir);
  Api api(server.port);
  auto [status, body] = api.post("/api/sessions", {{"user_id", "u1"}, {"study_id", "sab-fixture"}});
  CHECK(status == 409);
  CHECK(body["error"] == "WrongPhase");
  auto [s404, b404] = api.post("/api/sessions", {{"user_id", "u1"}, {"study_id", "nope"}});
  CHECK(s404 == 404);
  CHECK(b404["error"] == "UnknownStudy");
}

TEST_CASE("a full session over HTTP") {
  testing::TempDir tmp;
  const auto dir = study_in_human_phase(tmp.path());
  Server server(dir);
  Api api(server.port);

  auto [st, created] = api.post("/api/sessions", {{"user_id", "u1"}, {"study_id", "sab-fixture"}});
  REQUIRE(st == 201);
  const std::string sid = created["session_id"];
  const std::size_t n = created["num_cases"];
  CHECK(n == 10);
  auto [st2, second] = api.post("/api/sessions", {{"user_id", "u1"}, {"study_id", "sab-fixture"}});
  CHECK(st2 == 201);
  CHECK(second["session_id"] != sid);

  auto [s_next, view] = api.get("/api/sessions/" + sid + "/next?keep_fraction=0.1");
  REQUIRE(s_next == 200);
  CHECK(view["done"] == false);
  CHECK_FALSE(view["ai_disclosure"].get<std::string>().empty());
  REQUIRE(view["image"].size() == 8);
  REQUIRE(view["overlay"].size() == 8);
  std::size_t tinted = 0;
  for (const auto& row : view["overlay"])
    for (const auto& v : row) {
      CHECK(v.get<double>() >= 0.0);
      CHECK(v.get<double>() <= 1.0);
      tinted += v.get<double>() > 0;
    }
  CHECK(tinted <= 7);  // ceil(0.1 * 64)
  for (const auto& row : view["image"])
    for (const auto& v : row) CHECK((v.get<double>() >= 0.0 && v.get<double>() <= 1.0));

  const std::string first = view["case_id"];
  auto [s_bad, bad] = api.post("/api/sessions/" + sid + "/judgments", {{"case_id", "not-a-case"}, {"trusted", true}});
  CHECK(s_bad == 404);

  for (std::size_t i = 0; i < n; ++i) {
    auto [s, v] = api.get("/api/sessions/" + sid + "/next");
    REQUIRE(s == 200);
    auto [sj, ack] = api.post("/api/sessions/" + sid + "/judgments", {{"case_id", v["case_id"]}, {"trusted", i % 2 == 0}});
    CHECK(sj == 200);
    if (i == 0) {
      auto [sd, dup] = api.post("/api/sessions/" + sid + "/judgments", {{"case_id", first}, {"trusted", false}});
      CHECK(sd == 409);
      CHECK(dup["error"] == "DuplicateJudgment");
    }
  }
  auto [s_done, done] = api.get("/api/sessions/" + sid + "/next");
  CHECK(s_done == 200);
  CHECK(done["done"] == true);
  CHECK(done["judged"] == n);
  auto [s_stat, stat] = api.get("/api/sessions/" + sid + "/status");
  CHECK(s_stat == 200);
  CHECK(stat["status"] == "complete");
  auto [s404, unknown] = api.get("/api/sessions/sess-9999/next");
  CHECK(s404 == 404);
  CHECK(unknown["error"] == "UnknownSession");
}

TEST_CASE("judgments must follow the presented order") {
  testing::TempDir tmp;
  const auto dir = study_in_human_phase(tmp.path());
  Server server(dir);
  Api api(server.port);
  auto [st, created] = api.post("/api/sessions", {{"user_id", "u9"}, {"study_id", "sab-fixture"}});
  REQUIRE(st == 201);
  const std::string sid = created["session_id"];
  auto cases = Study::open(dir).sessions().load(sid)->cases();
  auto [s, body] = api.post("/api/sessions/" + sid + "/judgments", {{"case_id", cases[1]}, {"trusted", true}});
  CHECK(s == 409);
  auto [s2, bad] = api.post("/api/sessions/" + sid + "/judgments", {{"case_id", cases[0]}, {"trusted", "yes"}});
  CHECK(s2 == 400);
}

TEST_CASE("sessions resume after a restart") {
  testing::TempDir tmp;
  const auto dir = study_in_human_phase(tmp.path());
  std::string sid, second_case;
  {
    Server server(dir);
    Api api(server.port);
    auto [st, created] = api.post("/api/sessions", {{"user_id", "u1"}, {"study_id", "sab-fixture"}});
    sid = created["session_id"];
    auto [s, v] = api.get("/api/sessions/" + sid + "/next");
    api.post("/api/sessions/" + sid + "/judgments", {{"case_id", v["case_id"]}, {"trusted", true}});
    second_case = api.get("/api/sessions/" + sid + "/next").second["case_id"];
  }
  Server server(dir);
  Api api(server.port);
  auto [s, v] = api.get("/api/sessions/" + sid + "/next");
  CHECK(v["case_id"] == second_case);
  CHECK(api.get("/api/sessions/" + sid + "/status").second["judged"] == 1);
}

TEST_CASE("ALTAI endpoints") {
  testing::TempDir tmp;
  const auto dir = testing::make_fixture_study(tmp.path());
  Server server(dir);
  Api api(server.port);
  auto [s, pre] = api.get("/api/altai/PreEvaluation");
  REQUIRE(s == 200);
  CHECK(pre["requirements"] == json::array({3, 5, 6}));
  std::set<int> reqs;
  for (const auto& it : pre["items"]) reqs.insert(it["requirement_number"].get<int>());
  CHECK(reqs == std::set<int>{3, 5, 6});
  CHECK(pre["verdict"]["pass"] == false);

  auto [s_bad, bad] = api.post("/api/altai/answers",
                               {{"answers", {{{"item_id", "PDG-1"}, {"answer", "not_applicable"}, {"evidence", ""}}}}});
  CHECK(s_bad == 400);
  CHECK(bad["items"][0]["item_id"] == "PDG-1");

  json answers = json::array();
  for (const auto& it : pre["items"]) answers.push_back({{"item_id", it["item_id"]}, {"answer", "yes"}, {"evidence", "see file"}});
  auto [s_ok, ok] = api.post("/api/altai/answers", {{"answers", answers}, {"user_id", "officer"}});
  CHECK(s_ok == 200);
  CHECK(ok["verdict"]["pass"] == true);
  CHECK(api.get("/api/altai/operation").second["items"].size() == 14);
  CHECK(api.get("/api/altai/phase9").first == 400);

  auto res = api.client.Get("/");
  REQUIRE(res);
  CHECK(res->status == 200);
}
