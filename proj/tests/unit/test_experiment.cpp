#include <doctest.h>

#include <fstream>
#include <set>

#include "hntt/error.hpp"
#include "hntt/experiment.hpp"
#include "hntt/io.hpp"
#include "hntt/pipeline.hpp"
#include "test_util.hpp"

using namespace hntt;
using nlohmann::json;
using hntt::testing::scratch_dir;

namespace {

study::Dataset bernoulli_dataset(int judges, double p, std::uint64_t seed) {
  study::Dataset d;
  d.study_id = "fixture";
  d.agent_kind = "reward_shaping";
  Rng rng(seed);
  for (int j = 0; j < judges; ++j) {
    study::JudgeRow r;
    r.judge_id = "j" + std::to_string(j);
    int k = 0;
    double cert = 0.0;
    for (int t = 0; t < 6; ++t) {
      study::JudgeTrialRow tr;
      tr.position = t;
      tr.trial_index = t;
      tr.correct = uniform01(rng) < p;
      tr.certainty = 1 + static_cast<int>(uniform_index(rng, 5));
      k += tr.correct;
      cert += tr.certainty;
      r.trials.push_back(tr);
    }
    r.accuracy = k / 6.0;
    r.mean_uncertainty = cert / 6.0;
    r.familiarity_general = 1 + static_cast<int>(uniform_index(rng, 5));
    r.familiarity_specific = 1 + static_cast<int>(uniform_index(rng, 5));
    r.comprehension = json::object();
    d.judges.push_back(r);
  }
  return d;
}

StatsParams fast_stats() {
  StatsParams s;
  s.iterations = 2000;
  s.subsample_repeats = 20;
  return s;
}

}  // namespace

TEST_CASE("experiment config round-trip and validation") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.corpus_size == 100);
  CHECK(c.study.trials == 6);
  CHECK(c.study.min_duration_seconds == 10.0);
  CHECK(c.stats.level == 0.95);
  CHECK(c.stats.accuracy_split == 0.8);
  c.ppo.batch_size = 512;
  c.reward.shaping_enabled = true;
  c.seeds.judges = 77;
  const ExperimentConfig back = experiment_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));

  json j = to_json(c);
  j["surprise"] = 1;
  CHECK_THROWS_AS(experiment_from_json(j), ConfigError);
  CHECK_THROWS_AS(experiment_from_json(json{{"version", 99}}), ConfigError);
  CHECK_THROWS_AS(experiment_from_json(json{{"corpus", {{"mode", "sideways"}}}}), ConfigError);
  CHECK_THROWS_AS(experiment_from_json(json{{"ppo", {{"batch_size", "big"}}}}), ConfigError);
  // Partial documents keep the defaults.
  CHECK(to_json(experiment_from_json(json::object())) == to_json(ExperimentConfig{}));

  ExperimentConfig bad;
  bad.study.trials = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ExperimentConfig{};
  bad.map_path = "/no/such/map.json";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ExperimentConfig{};
  bad.stats.level = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ExperimentConfig{};
  bad.corpus_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("config files resolve maps relative to themselves") {
  const auto dir = scratch_dir("exp_cfg");
  std::filesystem::create_directories(dir / "maps");
  navsim::save_map(hntt::testing::open_map(), dir / "maps" / "open.json");
  io::write_atomic(dir / "cfg.json", json{{"map", "maps/open.json"}, {"corpus", {{"size", 12}}}}.dump());
  const ExperimentConfig c = load_experiment(dir / "cfg.json");
  CHECK(c.corpus_size == 12);
  CHECK_NOTHROW(c.validate());
  CHECK(c.load_map()->name == "open");
  CHECK(ExperimentConfig{}.load_map()->fingerprint() == navsim::default_map().fingerprint());
  CHECK_THROWS_AS(load_experiment(dir / "missing.json"), ConfigError);
  io::write_atomic(dir / "broken.json", "{");
  CHECK_THROWS_AS(load_experiment(dir / "broken.json"), ConfigError);
}

TEST_CASE("reseeding touches every stream") {
  ExperimentConfig a, b;
  a.reseed(7);
  b.reseed(7);
  CHECK(to_json(a) == to_json(b));
  const std::set<std::uint64_t> seeds = {a.seeds.train, a.seeds.rollout, a.seeds.pairing,
                                         a.seeds.service, a.seeds.stats, a.seeds.judges};
  CHECK(seeds.size() == 6);
  CHECK(a.ppo.seed == a.seeds.train);
  b.reseed(8);
  CHECK(a.seeds.stats != b.seeds.stats);
}

TEST_CASE("defaults description") {
  const auto lines = describe_defaults();
  CHECK(lines.size() > 20);
  bool batch = false;
  for (const auto& l : lines) {
    CHECK(l.find("e+") == std::string::npos);
    if (l.find("ppo.batch_size = 2048") != std::string::npos) batch = true;
  }
  CHECK(batch);
}

TEST_CASE("dataset ingestion from CSV and JSON exports") {
  const study::Dataset d = bernoulli_dataset(10, 0.6, 1);
  const study::Dataset from_csv = dataset_from_csv(study::to_csv(d));
  REQUIRE(from_csv.judges.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(from_csv.judges[i].judge_id == d.judges[i].judge_id);
    CHECK(from_csv.judges[i].accuracy == d.judges[i].accuracy);
    CHECK(from_csv.judges[i].mean_uncertainty == d.judges[i].mean_uncertainty);
    CHECK(from_csv.judges[i].familiarity_general == d.judges[i].familiarity_general);
    CHECK(from_csv.judges[i].familiarity_specific == d.judges[i].familiarity_specific);
  }
  // The analysis sees the same numbers either way.
  const auto dir = scratch_dir("exp_ingest");
  io::write_atomic(dir / "d.json", study::to_json(d).dump());
  io::write_atomic(dir / "d.csv", study::to_csv(d));
  json ra = analyze_dataset(load_dataset(dir / "d.json"), fast_stats(), 3);
  json rb = analyze_dataset(load_dataset(dir / "d.csv"), fast_stats(), 3);
  CHECK(ra.at("accuracy") == rb.at("accuracy"));
  CHECK(ra.at("regression") == rb.at("regression"));

  CHECK_THROWS_AS(load_dataset(dir / "nothing.csv"), NotFoundError);
  CHECK_THROWS_AS(dataset_from_csv(""), ValidationError);
  CHECK_THROWS_AS(dataset_from_csv("who,what\n1,2\n"), ValidationError);
  CHECK_THROWS_AS(dataset_from_csv("judge_id,accuracy\nj1,lots\n"), ValidationError);
  io::write_atomic(dir / "bad.json", "{\"judges\": 3");
  CHECK_THROWS_AS(load_dataset(dir / "bad.json"), ValidationError);
}

TEST_CASE("analysis verdicts") {
  SUBCASE("judges at chance pass") {
    const json r = analyze_dataset(bernoulli_dataset(92, 0.5, 11), fast_stats(), 1);
    CHECK(r.at("verdict") == "passes HNTT");
    CHECK(r.at("n_judges") == 92);
    CHECK(r.at("accuracy").at("passed") == true);
    CHECK(r.at("subsample").contains("pass_rate"));
    CHECK(r.at("regression").at("df") == json::array({2, 89}));
    CHECK(r.at("per_judge").size() == 92);
  }
  SUBCASE("accurate judges fail") {
    const json r = analyze_dataset(bernoulli_dataset(92, 0.9, 12), fast_stats(), 1);
    CHECK(r.at("verdict") == "fails HNTT");
  }
  SUBCASE("one judge is undetermined") {
    const json r = analyze_dataset(bernoulli_dataset(1, 0.5, 13), fast_stats(), 1);
    CHECK(r.at("verdict").get<std::string>().rfind("undetermined", 0) == 0);
    CHECK(r.at("subsample").contains("skipped"));
    CHECK(r.at("regression").contains("skipped"));
  }
  SUBCASE("no judges is an error") {
    study::Dataset empty;
    CHECK_THROWS_AS(analyze_dataset(empty, fast_stats(), 1), ValidationError);
  }
  SUBCASE("constant familiarity skips the regression") {
    study::Dataset d = bernoulli_dataset(30, 0.5, 14);
    for (auto& r : d.judges) r.familiarity_general = 3;
    CHECK(analyze_dataset(d, fast_stats(), 1).at("regression").contains("skipped"));
  }
  SUBCASE("deterministic for a seed") {
    const auto d = bernoulli_dataset(60, 0.55, 15);
    CHECK(analyze_dataset(d, fast_stats(), 4) == analyze_dataset(d, fast_stats(), 4));
  }
}

TEST_CASE("analysis with annotator labels") {
  const auto d = bernoulli_dataset(4, 0.7, 2);
  auto l = [](std::string item, std::string judge, stats::Category c, stats::Direction dir) {
    stats::CodeLabel x;
    x.item_id = std::move(item);
    x.judge_id = std::move(judge);
    x.category = c;
    x.direction = dir;
    return x;
  };
  LabelSets ls;
  ls.annotator_a = {l("1", "j0", stats::Category::kSmooth, stats::Direction::kPlus),
                    l("2", "j1", stats::Category::kGoal, stats::Direction::kMinus),
                    l("3", "j2", stats::Category::kIntuition, stats::Direction::kNone)};
  ls.annotator_b = {l("1", "j0", stats::Category::kSmooth, stats::Direction::kPlus),
                    l("2", "j1", stats::Category::kGoal, stats::Direction::kPlus),
                    l("3", "j2", stats::Category::kIntuition, stats::Direction::kNone)};
  const json r = analyze_dataset(d, fast_stats(), 1, ls);
  CHECK(r.at("kappa").at("by_code").size() == 4);
  CHECK(r.at("code_proportions").at("humanlike").contains("more"));
  CHECK(r.at("code_proportions").contains("accuracy_group"));
  ls.annotator_b.pop_back();
  CHECK_THROWS_AS(analyze_dataset(d, fast_stats(), 1, ls), ArgumentError);
}

TEST_CASE("report rendering") {
  const json a = analyze_dataset(bernoulli_dataset(40, 0.5, 3), fast_stats(), 1);
  json b = analyze_dataset(bernoulli_dataset(40, 0.9, 4), fast_stats(), 1);
  b["agent_kind"] = "hybrid";
  const std::string text = render_reports({a, b});
  CHECK(text.find("Median Accuracy (IQR) [95% CI]") != std::string::npos);
  CHECK(text.find("Median Uncertainty (IQR)") != std::string::npos);
  CHECK(text.find("reward_shaping") != std::string::npos);
  CHECK(text.find("passes HNTT") != std::string::npos);
  CHECK(text.find("fails HNTT") != std::string::npos);
}

TEST_CASE("pipeline stages on a small corpus") {
  setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  CHECK(pipeline::record_timestamp() == "2023-11-14T22:13:20Z");
  const auto dir = scratch_dir("exp_pipeline");
  const pipeline::Layout layout{dir};
  ExperimentConfig cfg;
  cfg.corpus_size = 60;
  cfg.agent_kind = ppo::AgentKind::kHybrid;
  cfg.stats = fast_stats();
  cfg.stats.subsample_n = 20;

  CHECK_THROWS_AS(pipeline::rollout(cfg, layout, traj::Controller::kHybrid), NotFoundError);
  CHECK_THROWS_AS(pipeline::rollout(cfg, layout, traj::Controller::kHuman), ArgumentError);
  CHECK_THROWS_AS(pipeline::judge_sim(cfg, layout, "study-hybrid", {}), NotFoundError);

  const auto map = cfg.load_map();
  ppo::Agent agent = ppo::make_agent(ppo::AgentKind::kHybrid, *map, 16, 3);
  std::filesystem::create_directories(layout.agent_dir(ppo::AgentKind::kHybrid));
  ppo::save_checkpoint(agent, layout.checkpoint(ppo::AgentKind::kHybrid));

  CHECK(pipeline::rollout(cfg, layout, traj::Controller::kHybrid) == 60);
  CHECK(pipeline::rollout(cfg, layout, traj::Controller::kScriptedProxy) == 60);
  const std::string corpus_before = io::read_file(layout.corpus(traj::Controller::kHybrid) / "index.json");
  pipeline::rollout(cfg, layout, traj::Controller::kHybrid);
  CHECK(io::read_file(layout.corpus(traj::Controller::kHybrid) / "index.json") == corpus_before);

  const study::StudyDefinition def = pipeline::build_study(cfg, layout, {});
  CHECK(def.study_id == "study-hybrid");
  CHECK(def.trials.size() == 6);
  for (const auto& t : def.trials) {
    CHECK(t.pair.duration_a >= 10.0 - 1e-9);
    CHECK(t.pair.duration_b >= 10.0 - 1e-9);
    CHECK(t.pair.controller_a == traj::Controller::kScriptedProxy);
    CHECK(t.pair.controller_b == traj::Controller::kHybrid);
  }
  // Rebuilding the same study is a no-op; a different one under the same id is refused.
  const std::string study_bytes = io::read_file(layout.study_file("study-hybrid"));
  pipeline::build_study(cfg, layout, {});
  CHECK(io::read_file(layout.study_file("study-hybrid")) == study_bytes);
  ExperimentConfig other = cfg;
  other.seeds.pairing = 999;
  CHECK_THROWS_AS(pipeline::build_study(other, layout, {}), ConfigError);

  pipeline::JudgeSimOptions sim;
  sim.judges = 30;
  const study::Dataset d = pipeline::judge_sim(cfg, layout, "study-hybrid", sim);
  CHECK(d.judges.size() == 30);
  const std::string export_bytes = io::read_file(layout.export_json("study-hybrid"));
  pipeline::judge_sim(cfg, layout, "study-hybrid", sim);
  CHECK(io::read_file(layout.export_json("study-hybrid")) == export_bytes);

  const json rep = pipeline::analyze(cfg, layout, "study-hybrid", std::nullopt, std::nullopt);
  CHECK(rep.at("n_judges") == 30);
  CHECK(std::filesystem::exists(layout.report("study-hybrid")));
  const std::string summary = pipeline::report(layout);
  CHECK(summary.find("hybrid") != std::string::npos);
  CHECK(io::read_file(layout.summary()) == summary);
  unsetenv("SOURCE_DATE_EPOCH");
}

TEST_CASE("synthetic judges answer at the requested rate") {
  KvStore db(":memory:");
  study::StudyService svc(db, {3, 1});
  const auto dir = scratch_dir("exp_judges");
  traj::TrajectoryStore store(dir);
  std::vector<traj::TrialPair> pairs;
  for (int g = 0; g < 6; ++g) {
    traj::Trajectory h, a;
    for (auto* t : {&h, &a}) {
      t->goal_index = g;
      t->steps.resize(55);
      t->steps.back().info.truncated = true;
      t->duration_seconds = 11.0;
    }
    h.id = "h" + std::to_string(g);
    h.controller = traj::Controller::kScriptedProxy;
    a.id = "a" + std::to_string(g);
    a.controller = traj::Controller::kHybrid;
    store.put_all({h, a});
    pairs.push_back(traj::make_pair(h, a, "p" + std::to_string(g)));
  }
  svc.create_study(study::build_study("rate", "hybrid", pairs, store));
  pipeline::JudgeSimOptions o;
  o.judges = 300;
  o.p_correct = 0.8;
  pipeline::simulate_judges(svc, "rate", o, 5);
  const auto d = svc.export_dataset("rate");
  CHECK(d.judges.size() == 300);
  double correct = 0.0;
  for (const auto& j : d.judges) {
    correct += j.accuracy * 6;
    CHECK(j.familiarity_general.has_value());
  }
  // 1800 Bernoulli(0.8) trials: mean within 4 standard errors.
  CHECK(std::abs(correct / 1800.0 - 0.8) < 4 * std::sqrt(0.8 * 0.2 / 1800.0));
  // Rerunning leaves the existing judges alone.
  pipeline::simulate_judges(svc, "rate", o, 6);
  CHECK(study::to_json(svc.export_dataset("rate")) == study::to_json(d));
}
