#include <doctest.h>

#include "support.hpp"
#include "xaihealth/error.hpp"
#include "xaihealth/io.hpp"
#include "xaihealth/trust.hpp"

using namespace xaihealth;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

// Judgments and outcomes realising the given confusion counts.
struct Fixture {
  std::vector<TrustJudgment> judgments;
  std::map<std::string, bool> outcomes;
};

Fixture from_counts(const std::string& user, std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  Fixture f;
  std::size_t n = 0;
  auto add = [&](std::size_t count, bool correct, bool trusted) {
    for (std::size_t i = 0; i < count; ++i) {
      const auto id = user + "-case-" + std::to_string(n++);
      f.outcomes[id] = correct;
      f.judgments.push_back(TrustJudgment{id, user, trusted, ""});
    }
  };
  add(tp, true, true);
  add(fp, false, true);
  add(fn, true, false);
  add(tn, false, false);
  return f;
}

}  // namespace

TEST_CASE("confusion counts") {
  std::map<std::string, bool> outcomes{{"a", true}, {"b", false}};
  std::vector<TrustJudgment> one{{"a", "u", true, ""}};
  CHECK(build_confusion(one, outcomes) == TrustConfusion{1, 0, 0, 0});
  std::vector<TrustJudgment> two{{"a", "u", false, ""}, {"b", "u", true, ""}};
  CHECK(build_confusion(two, outcomes) == TrustConfusion{0, 1, 1, 0});
  std::vector<TrustJudgment> dup{{"a", "u", true, ""}, {"a", "u", false, ""}};
  CHECK(code_of([&] { build_confusion(dup, outcomes); }) == ErrorCode::DuplicateJudgment);
  std::vector<TrustJudgment> unknown{{"zzz", "u", true, ""}};
  CHECK(code_of([&] { build_confusion(unknown, outcomes); }) == ErrorCode::MissingOutcome);
}

TEST_CASE("table of two raters") {
  // User 1: precision 7/64, recall 7/21. 7 + 57 + 14 already exceeds 64
  // cases, so the distrusted-incorrect cell is free; 22 gives 100 cases.
  auto u1 = from_counts("u1", 7, 57, 14, 22);
  auto u2 = from_counts("u2", 1, 63, 13, 23);
  auto c1 = build_confusion(u1.judgments, u1.outcomes);
  auto c2 = build_confusion(u2.judgments, u2.outcomes);
  CHECK(c1 == TrustConfusion{7, 57, 14, 22});
  auto m1 = trust_metrics(c1), m2 = trust_metrics(c2);
  CHECK(round_half_up(m1.precision, 4) == 0.1094);
  CHECK(round_half_up(m1.recall, 4) == 0.3333);
  CHECK(round_half_up(m1.f1, 4) == 0.1647);
  CHECK(round_half_up(m2.precision, 4) == 0.0156);
  CHECK(round_half_up(m2.recall, 4) == 0.0714);
  CHECK(round_half_up(m2.f1, 4) == 0.0256);
  std::vector<TrustMetrics> both{m1, m2};
  auto mean = aggregate_users(both);
  CHECK(std::abs(mean.precision - 0.0625) <= 5e-4);
  CHECK(std::abs(mean.recall - 0.2022) <= 5e-4);
  CHECK(std::abs(mean.f1 - 0.0952) <= 5e-4);
}

TEST_CASE("display-rounded means") {
  std::vector<TrustMetrics> v{{0.1094, 0.3333, 0.1647}, {0.0156, 0.0714, 0.0256}};
  auto mean = aggregate_users(v);
  CHECK(round_half_up(mean.precision, 4) == 0.0625);
  CHECK(std::abs(mean.recall - 0.2022) <= 5e-4);
  CHECK(round_half_up(mean.f1, 4) == doctest::Approx(0.0952));
  CHECK(code_of([] { aggregate_users(std::vector<TrustMetrics>{}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("metric edge cases") {
  auto perfect = trust_metrics(TrustConfusion{5, 0, 0, 3});
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  auto none = trust_metrics(TrustConfusion{0, 4, 2, 1});
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);
  auto empty = trust_metrics(TrustConfusion{});
  CHECK(empty.f1 == 0.0);
  CHECK(round_half_up(0.00005, 4) == 0.0001);
  CHECK(round_half_up(0.12345, 4) == 0.1235);
}

TEST_CASE("session lifecycle") {
  TrustSession s("s1", "u", {"a", "b"});
  CHECK(s.current_case() == std::optional<std::string>("a"));
  s = record_judgment(s, TrustJudgment{"a", "u", true, ""});
  CHECK(s.status() == SessionStatus::open);
  CHECK(code_of([&] { record_judgment(s, TrustJudgment{"a", "u", false, ""}); }) == ErrorCode::DuplicateJudgment);
  CHECK(code_of([&] { record_judgment(s, TrustJudgment{"zz", "u", false, ""}); }) == ErrorCode::UnknownCase);
  CHECK(code_of([&] { record_judgment(s, TrustJudgment{"b", "other", false, ""}); }) == ErrorCode::InvalidConfig);
  s = record_judgment(s, TrustJudgment{"b", "u", false, ""});
  CHECK(s.complete());
  CHECK_FALSE(s.current_case().has_value());
}

TEST_CASE("session store persists and replays") {
  testing::TempDir dir;
  SessionStore store(dir / "sessions");
  auto s = store.create("sess-0001", "u", {"a", "b", "c"}, 42, "t0");
  store.append_view("sess-0001", "a", 0.5, "t1");
  s = store.append_judgment(s, TrustJudgment{"a", "u", true, "t2"}, 0.5);
  auto loaded = store.load("sess-0001");
  REQUIRE(loaded.has_value());
  CHECK(loaded->judgments().size() == 1);
  CHECK(loaded->cases() == std::vector<std::string>{"a", "b", "c"});
  CHECK(loaded->current_case() == std::optional<std::string>("b"));
  CHECK_FALSE(store.load("sess-9999").has_value());
  CHECK(code_of([&] { store.create("sess-0001", "u", {"a"}, 1, "t"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { store.append_judgment(*loaded, TrustJudgment{"a", "u", false, ""}, std::nullopt); }) ==
        ErrorCode::DuplicateJudgment);
  store.create("sess-0002", "v", {"c"}, 43, "t3");
  CHECK(store.count() == 2);
  CHECK(store.load_all().size() == 2);

  const auto lines = io::read_lines(dir / "sessions" / "sess-0001.jsonl");
  REQUIRE(lines.size() == 3);
  CHECK(nlohmann::json::parse(lines[0])["type"] == "session");
  CHECK(nlohmann::json::parse(lines[1])["type"] == "view");
  CHECK(nlohmann::json::parse(lines[2])["keep_fraction"] == 0.5);
}
