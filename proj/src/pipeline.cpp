#include "hntt/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <set>

#include "hntt/error.hpp"
#include "hntt/io.hpp"
#include "hntt/kvstore.hpp"

namespace hntt::pipeline {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void say(const Log& log, const std::string& msg) {
  if (log) log(msg);
}

NotFoundError missing(const fs::path& what, const std::string& command) {
  return NotFoundError(what.string() + " not found; run `hntt " + command + "` first");
}

const char* kJustifications[] = {
    "smoother turns around the corner",   "it hesitated before the jump",
    "went straight for the goal",         "bumped into the wall twice",
    "camera moves looked jittery",        "paused like a person looking around",
    "took a wide line around obstacles",  "movement looked too precise",
    "overshot the turn and corrected",    "gut feeling",
    "it reminded me of how I play",       "looked around before committing",
};

}  // namespace

fs::path Layout::agent_dir(ppo::AgentKind kind) const { return root / "agents" / ppo::to_string(kind); }
fs::path Layout::checkpoint(ppo::AgentKind kind) const { return agent_dir(kind) / "final.json"; }
fs::path Layout::curve(ppo::AgentKind kind) const { return agent_dir(kind) / "learning_curve.csv"; }
fs::path Layout::corpus(traj::Controller c) const { return root / "corpus" / traj::to_string(c); }
fs::path Layout::study_file(const std::string& id) const { return root / "studies" / (id + ".json"); }
fs::path Layout::pairs_file(const std::string& id) const { return root / "studies" / (id + ".pairs.json"); }
fs::path Layout::database() const { return root / "study.db"; }
fs::path Layout::export_json(const std::string& id) const { return root / "exports" / (id + ".json"); }
fs::path Layout::export_csv(const std::string& id) const { return root / "exports" / (id + ".csv"); }
fs::path Layout::report(const std::string& id) const { return root / "reports" / (id + ".json"); }
fs::path Layout::summary() const { return root / "reports" / "summary.txt"; }

fs::path default_data_dir() {
  if (const char* d = std::getenv("HNTT_DATA_DIR"); d && *d) return d;
  return "hntt_data";
}

std::string record_timestamp() {
  const char* e = std::getenv("SOURCE_DATE_EPOCH");
  if (!e || !*e) return io::utc_now();
  std::time_t t = 0;
  try {
    t = static_cast<std::time_t>(std::stoll(e));
  } catch (const std::exception&) {
    throw ConfigError("SOURCE_DATE_EPOCH must be an integer");
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string default_study_id(ppo::AgentKind kind) { return "study-" + ppo::to_string(kind); }

ppo::TrainResult train(const ExperimentConfig& cfg, const Layout& layout, const Log& log) {
  ppo::TrainOptions opts;
  opts.out_dir = layout.agent_dir(cfg.agent_kind);
  opts.on_update = [&](const ppo::UpdateStats&, const ppo::CurvePoint* p) {
    if (!p || !log) return;
    char buf[160];
    std::snprintf(buf, sizeof buf, "step %lld  mean_len %.1f  success %.3f", static_cast<long long>(p->step),
                  p->mean_episode_length, p->success_rate);
    log(buf);
  };
  auto result = ppo::train(cfg.agent_kind, cfg.ppo, cfg.load_map(), cfg.reward, opts);
  say(log, "wrote " + layout.checkpoint(cfg.agent_kind).string());
  return result;
}

int rollout(const ExperimentConfig& cfg, const Layout& layout, traj::Controller controller, const Log& log) {
  const auto map = cfg.load_map();
  traj::RolloutOptions ro;
  ro.n = cfg.corpus_size;
  ro.mode = cfg.rollout_mode;
  ro.seed = cfg.seeds.rollout;
  ro.created_at = record_timestamp();
  std::vector<traj::Trajectory> corpus;
  switch (controller) {
    case traj::Controller::kHuman:
      throw ArgumentError("human trajectories are recorded through play mode (`hntt serve`), not rollout");
    case traj::Controller::kScriptedProxy: {
      reward::RewardConfig rc = cfg.reward;
      rc.shaping_enabled = false;
      corpus = traj::proxy_corpus(map, rc, ro);
      break;
    }
    default: {
      const ppo::AgentKind kind = controller == traj::Controller::kSymbolic ? ppo::AgentKind::kSymbolic
                                  : controller == traj::Controller::kHybrid ? ppo::AgentKind::kHybrid
                                                                            : ppo::AgentKind::kRewardShaping;
      const fs::path ckpt = layout.checkpoint(kind);
      if (!fs::exists(ckpt)) throw missing(ckpt, "train --agent " + ppo::to_string(kind));
      const ppo::Agent agent = ppo::load_checkpoint(ckpt, map.get());
      corpus = traj::rollout_corpus(agent, map, cfg.reward, ro);
    }
  }
  traj::TrajectoryStore store(layout.corpus(controller));
  // Reruns keep the original timestamps so the files stay byte-identical.
  for (traj::Trajectory& t : corpus) {
    if (store.contains(t.id)) t.created_at = store.get(t.id).created_at;
  }
  store.put_all(corpus);
  say(log, "wrote " + std::to_string(corpus.size()) + " trajectories to " + store.root().string());
  return static_cast<int>(corpus.size());
}

study::StudyDefinition build_study(const ExperimentConfig& cfg, const Layout& layout,
                                   const BuildStudyOptions& options, const Log& log) {
  if (!traj::is_human_side(options.human_side)) throw ArgumentError("human side must be human or scripted_proxy");
  const traj::Controller agent_ctl = traj::controller_for(cfg.agent_kind);
  const fs::path human_dir = layout.corpus(options.human_side);
  const fs::path agent_dir = layout.corpus(agent_ctl);
  if (!fs::exists(human_dir / "index.json")) {
    throw missing(human_dir, options.human_side == traj::Controller::kHuman
                                 ? "serve` (play mode) or `hntt rollout --controller scripted_proxy"
                                 : "rollout --controller scripted_proxy");
  }
  if (!fs::exists(agent_dir / "index.json")) throw missing(agent_dir, "rollout --controller " + traj::to_string(agent_ctl));

  const traj::TrajectoryStore humans(human_dir), agents(agent_dir);
  traj::FilterOptions fo;
  fo.min_duration_seconds = cfg.study.min_duration_seconds;
  fo.human_trim_seconds = cfg.study.trim_seconds;
  const auto h = traj::filter_and_postprocess(humans.load_all(), fo);
  const auto a = traj::filter_and_postprocess(agents.load_all(), fo);
  say(log, "eligible trajectories: " + std::to_string(h.size()) + " human-side, " + std::to_string(a.size()) + " agent");

  Rng rng(cfg.seeds.pairing);
  // Pairs must still meet the duration rule after the human tail trim.
  const auto pairs = traj::pair_by_goal(h, a, cfg.study.trials, rng, cfg.study.min_duration_seconds);

  // The study embeds post-processed replays, so resolve from the filtered sets.
  const fs::path staging = layout.root / "studies" / ".staging";
  fs::remove_all(staging);
  traj::TrajectoryStore staged(staging);
  std::set<std::string> used;
  for (const auto& p : pairs) used.insert({p.video_a, p.video_b});
  for (const auto* set : {&h, &a}) {
    for (const auto& t : *set) {
      if (used.count(t.id)) staged.put(t);
    }
  }
  const std::string id = options.study_id.empty() ? default_study_id(cfg.agent_kind) : options.study_id;
  study::StudyDefinition def = study::build_study(id, ppo::to_string(cfg.agent_kind), pairs, staged);
  fs::remove_all(staging);

  traj::save_pairs(pairs, layout.pairs_file(id));
  io::write_atomic(layout.study_file(id), study::to_json(def).dump(2) + "\n");

  KvStore db(layout.database().string());
  study::StudyService service(db, {cfg.study.min_justification_chars, cfg.seeds.service});
  const auto existing = db.get("study/" + id);
  if (!existing) {
    service.create_study(def);
  } else if (json::parse(*existing) != study::to_json(def)) {
    throw ConfigError("study " + id + " is already registered with different content; pick another --study-id");
  }
  say(log, "wrote " + layout.study_file(id).string());
  return def;
}

void simulate_judges(study::StudyService& service, const std::string& study_id, const JudgeSimOptions& options,
                     std::uint64_t seed) {
  if (options.judges <= 0) throw ArgumentError("judge count must be > 0");
  if (!(options.p_correct >= 0.0 && options.p_correct <= 1.0)) throw ArgumentError("p_correct must be in [0, 1]");
  constexpr std::size_t kTexts = sizeof kJustifications / sizeof kJustifications[0];
  for (int j = 0; j < options.judges; ++j) {
    char name[64];
    std::snprintf(name, sizeof name, "%s%03d", options.judge_prefix.c_str(), j);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
    study::Session s;
    try {
      s = service.create_session(study_id, name, rng);
    } catch (const ValidationError& e) {
      if (e.code() == "duplicate_judge") continue;
      throw;
    }
    study::SurveyAnswers survey;
    survey.familiarity_general = 1 + static_cast<int>(uniform_index(rng, 5));
    survey.familiarity_specific = 1 + static_cast<int>(uniform_index(rng, 5));
    survey.comprehension = {{"expected_time", "about 10 minutes"}, {"all_required", "yes"}};
    service.submit_survey(s.session_id, survey);
    for (int trial : s.trial_order) {
      const bool correct = uniform01(rng) < options.p_correct;
      const traj::Slot human = s.human_slot[static_cast<std::size_t>(trial)];
      const traj::Slot pick = correct ? human : (human == traj::Slot::kA ? traj::Slot::kB : traj::Slot::kA);
      study::ResponseInput in;
      in.trial_index = trial;
      in.choice = traj::to_string(pick);
      in.justification = kJustifications[uniform_index(rng, kTexts)];
      in.certainty = 1 + static_cast<int>(uniform_index(rng, 5));
      in.page_seconds = 20.0 + 40.0 * uniform01(rng);
      service.submit_response(s.session_id, in);
    }
  }
}

study::Dataset judge_sim(const ExperimentConfig& cfg, const Layout& layout, const std::string& study_id,
                         const JudgeSimOptions& options, const Log& log) {
  if (!fs::exists(layout.database())) throw missing(layout.database(), "build-study");
  KvStore db(layout.database().string());
  study::StudyService service(db, {cfg.study.min_justification_chars, cfg.seeds.service});
  service.get_study(study_id);
  simulate_judges(service, study_id, options, cfg.seeds.judges);
  const study::Dataset d = service.export_dataset(study_id);
  io::write_atomic(layout.export_json(study_id), study::to_json(d).dump(2) + "\n");
  io::write_atomic(layout.export_csv(study_id), study::to_csv(d));
  say(log, "exported " + std::to_string(d.judges.size()) + " judges to " + layout.export_json(study_id).string());
  return d;
}

json analyze(const ExperimentConfig& cfg, const Layout& layout, const std::string& study_id,
             const std::optional<fs::path>& dataset, const std::optional<LabelSets>& labels, const Log& log) {
  const fs::path src = dataset ? *dataset : layout.export_json(study_id);
  if (!fs::exists(src)) throw missing(src, "judge-sim` or export the study from `hntt serve");
  study::Dataset d = load_dataset(src);
  if (d.study_id.empty()) d.study_id = study_id;
  const json r = analyze_dataset(d, cfg.stats, cfg.seeds.stats, labels);
  io::write_atomic(layout.report(study_id), r.dump(2) + "\n");
  say(log, "wrote " + layout.report(study_id).string() + " (" + r.at("verdict").get<std::string>() + ")");
  return r;
}

std::string report(const Layout& layout, const std::vector<fs::path>& reports) {
  std::vector<fs::path> files = reports;
  if (files.empty()) {
    const fs::path dir = layout.root / "reports";
    if (fs::exists(dir)) {
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".json") files.push_back(e.path());
      }
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw missing(layout.root / "reports", "analyze");
  std::vector<json> docs;
  for (const fs::path& f : files) {
    try {
      docs.push_back(json::parse(io::read_file(f)));
    } catch (const json::exception& e) {
      throw ValidationError("invalid_report", f.string() + ": " + e.what());
    }
  }
  const std::string text = render_reports(docs);
  io::write_atomic(layout.summary(), text);
  return text;
}

LabelSets load_labels(const fs::path& a, const fs::path& b) {
  return {stats::read_labels_csv(io::read_file(a)), stats::read_labels_csv(io::read_file(b))};
}

}  // namespace hntt::pipeline
