#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>

#include "hntt/experiment.hpp"
#include "hntt/io.hpp"
#include "test_util.hpp"

using nlohmann::json;
using hntt::testing::scratch_dir;

namespace {

struct Run {
  int code = -1;
  std::string out;  // stdout and stderr merged
};

Run hntt_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + std::string(HNTT_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// Output of a command whose stdout is JSON, without stderr noise.
json cli_json(const std::string& args) {
  const std::string cmd = std::string(HNTT_CLI) + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  std::string text;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) text.append(buf.data(), n);
  pclose(p);
  return json::parse(text);
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(hntt_cli("").code == 2);
  CHECK(hntt_cli("frobnicate").code == 2);
  CHECK(hntt_cli("--config /no/such.json config").code == 2);
  CHECK(hntt_cli("--agent ninja config").code == 2);
  CHECK(hntt_cli("judge-sim --p-correct 1.5").code == 2);
}

TEST_CASE("help lists defaults, environment and exit codes") {
  const Run r = hntt_cli("--help");
  CHECK(r.code == 0);
  CHECK(r.out.find("ppo.batch_size = 2048") != std::string::npos);
  CHECK(r.out.find("HNTT_DATA_DIR") != std::string::npos);
  CHECK(r.out.find("Exit codes") != std::string::npos);
  for (const char* sub : {"train", "rollout", "build-study", "serve", "judge-sim", "analyze", "report", "pipeline"}) {
    CHECK(r.out.find(sub) != std::string::npos);
  }
}

TEST_CASE("config problems exit with 2") {
  const auto dir = scratch_dir("cli_config");
  hntt::io::write_atomic(dir / "badmap.json", R"({"map": "nowhere.json"})");
  Run r = hntt_cli("--config " + (dir / "badmap.json").string() + " config");
  CHECK(r.code == 2);
  CHECK(r.out.find("map file not found") != std::string::npos);
  hntt::io::write_atomic(dir / "unknown.json", R"({"colour": "blue"})");
  r = hntt_cli("--config " + (dir / "unknown.json").string() + " config");
  CHECK(r.code == 2);
  CHECK(r.out.find("colour") != std::string::npos);
  hntt::io::write_atomic(dir / "range.json", R"({"stats": {"level": 2}})");
  CHECK(hntt_cli("--config " + (dir / "range.json").string() + " config").code == 2);
}

TEST_CASE("config and map commands print the effective settings") {
  CHECK(cli_json("config") == hntt::to_json(hntt::ExperimentConfig{}));
  const json seeded = cli_json("--seed 9 --agent hybrid config");
  hntt::ExperimentConfig c;
  c.reseed(9);
  c.agent_kind = hntt::ppo::AgentKind::kHybrid;
  CHECK(seeded == hntt::to_json(c));
  const json shipped = json::parse(hntt::io::read_file(hntt::testing::source_dir() / "data" / "default_map.json"));
  CHECK(cli_json("map") == shipped);
}

TEST_CASE("missing artifacts name the command that makes them") {
  const auto dir = scratch_dir("cli_missing");
  const std::string out = "--out " + dir.string() + " ";
  Run r = hntt_cli(out + "--agent hybrid rollout");
  CHECK(r.code == 3);
  CHECK(r.out.find("hntt train --agent hybrid") != std::string::npos);
  r = hntt_cli(out + "analyze --study-id nope");
  CHECK(r.code == 3);
  CHECK(r.out.find("judge-sim") != std::string::npos);
  r = hntt_cli(out + "build-study");
  CHECK(r.code == 3);
  r = hntt_cli(out + "rollout --controller human");
  CHECK(r.code == 3);

  hntt::io::write_atomic(dir / "empty.json", R"({"study_id": "x", "agent_kind": "hybrid", "judges": []})");
  r = hntt_cli(out + "analyze --dataset " + (dir / "empty.json").string());
  CHECK(r.code == 3);
  CHECK(r.out.find("no judges") != std::string::npos);
}

TEST_CASE("pipeline end to end is reproducible") {
  const auto dir = scratch_dir("cli_pipeline");
  const std::string env = "SOURCE_DATE_EPOCH=1700000000";
  const std::string args = "--out " + dir.string() + " -q --agent hybrid pipeline --steps 2048 --judges 60";
  Run r = hntt_cli(args, env);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Median Accuracy (IQR) [95% CI]") != std::string::npos);
  CHECK(r.out.find("HNTT") != std::string::npos);
  const auto report = dir / "reports" / "study-hybrid.json";
  const auto csv = dir / "exports" / "study-hybrid.csv";
  REQUIRE(std::filesystem::exists(report));
  REQUIRE(std::filesystem::exists(csv));
  const std::string report_bytes = hntt::io::read_file(report);
  const std::string csv_bytes = hntt::io::read_file(csv);
  CHECK(json::parse(report_bytes).at("n_judges") == 60);

  r = hntt_cli(args + " --skip-train", env);
  CHECK(r.code == 0);
  CHECK(hntt::io::read_file(report) == report_bytes);
  CHECK(hntt::io::read_file(csv) == csv_bytes);

  // Stand-alone analysis of the CSV export agrees with the pipeline's.
  r = hntt_cli("--out " + dir.string() + " -q analyze --study-id from-csv --dataset " + csv.string(), env);
  CHECK(r.code == 0);
  const json a = json::parse(hntt::io::read_file(dir / "reports" / "from-csv.json"));
  CHECK(a.at("accuracy") == json::parse(report_bytes).at("accuracy"));
  r = hntt_cli("--out " + dir.string() + " report");
  CHECK(r.code == 0);
  CHECK(r.out.find("Median Uncertainty (IQR)") != std::string::npos);
}
