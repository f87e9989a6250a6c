#include <doctest.h>

#include <sstream>

#include "fixture_study.hpp"
#include "support.hpp"
#include "xaihealth/cli.hpp"
#include "xaihealth/io.hpp"

using namespace xaihealth;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"report"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitPass);
  CHECK(cli({"report", "--study", "/nonexistent/study"}).code == kExitUsage);
}

TEST_CASE("sab generate writes a loadable dataset") {
  testing::TempDir tmp;
  auto r = cli({"sab", "generate", "--config", std::string(XAIHEALTH_FIXTURES) + "/sab_config.json", "--out",
                (tmp / "sab").string()});
  CHECK(r.code == kExitPass);
  CHECK(load_dataset(tmp / "sab" / "manifest.json").size() == 40);
  CHECK(std::filesystem::exists(tmp / "sab" / "model.json"));
}

TEST_CASE("study workflow through the CLI") {
  testing::TempDir tmp;
  const auto dir = testing::make_fixture_study(tmp.path()).string();

  CHECK(cli({"report", "--study", dir}).code == kExitUsage);  // nothing to report yet

  auto check = cli({"altai", "check", "--study", dir, "--phase", "pre"});
  CHECK(check.code == kExitPass);
  CHECK(check.out.find("requirements: 3 5 6") != std::string::npos);

  auto machine = cli({"eval", "machine", "--study", dir, "--csv", (tmp / "m.csv").string()});
  CHECK(machine.code == kExitPass);
  CHECK(machine.out.find("mean_lle=") != std::string::npos);
  CHECK(io::read_text(tmp / "m.csv").rfind("instance_id,metric,score\n", 0) == 0);

  auto run = cli({"study", "run", "--study", dir, "--until", "pre"});
  CHECK(run.code == kExitPass);
  CHECK(run.out.find("current phase: MachineCentred") != std::string::npos);
  run = cli({"study", "run", "--study", dir});
  CHECK(run.code == kExitPass);
  CHECK(run.out.find("waiting for trust sessions") != std::string::npos);

  CHECK(cli({"eval", "trust", "--study", dir}).code == kExitUsage);  // no complete sessions
  CHECK(cli({"monitor", "--study", dir, "--data", dir + "/data"}).code == kExitUsage);  // not in Operation

  auto rep = cli({"report", "--study", dir, "--out", (tmp / "report.json").string()});
  CHECK(rep.code == kExitPass);
  CHECK(io::read_json(tmp / "report.json")["study"]["current_phase"] == "HumanCentred");
}

TEST_CASE("failing gates exit 1") {
  testing::TempDir tmp;
  const auto dir = testing::make_fixture_study(tmp.path());
  auto cfg = io::read_json(dir / "study.json");
  cfg["gates"]["accuracy_min"] = 0.99;
  io::write_json(dir / "study.json", cfg);
  auto run = cli({"study", "run", "--study", dir.string()});
  CHECK(run.code == kExitGateFail);
  CHECK(run.out.find("AccuracyBelowMinimum") != std::string::npos);

  std::filesystem::remove(dir / "altai_answers.json");
  testing::TempDir tmp2;
  const auto dir2 = testing::make_fixture_study(tmp2.path());
  std::filesystem::remove(dir2 / "altai_answers.json");
  CHECK(cli({"altai", "check", "--study", dir2.string(), "--phase", "operation"}).code == kExitGateFail);
}

TEST_CASE("runtime errors exit 3") {
  CHECK(exit_code_for(ErrorCode::ProcessDied) == kExitRuntime);
  CHECK(exit_code_for(ErrorCode::AuditCorrupt) == kExitRuntime);
  CHECK(exit_code_for(ErrorCode::InvalidConfig) == kExitUsage);
}
