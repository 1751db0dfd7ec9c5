#include "hntt/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "hntt/error.hpp"
#include "hntt/io.hpp"

namespace hntt::traj {
namespace {

using nlohmann::json;

json info_to_json(const navsim::StepInfo& i) {
  return {{"collided_wall", i.collided_wall},
          {"displacement", i.displacement},
          {"recent_travel", i.recent_travel},
          {"heading_delta", i.heading_delta},
          {"reached_goal", i.reached_goal},
          {"died", i.died},
          {"jumped", i.jumped},
          {"truncated", i.truncated},
          {"prev_goal_distance", i.prev_goal_distance},
          {"new_goal_distance", i.new_goal_distance},
          {"initial_goal_distance", i.initial_goal_distance}};
}

navsim::StepInfo info_from_json(const json& j) {
  navsim::StepInfo i;
  i.collided_wall = j.at("collided_wall").get<bool>();
  i.displacement = j.at("displacement").get<double>();
  i.recent_travel = j.at("recent_travel").get<double>();
  i.heading_delta = j.at("heading_delta").get<double>();
  i.abs_heading_delta = std::abs(i.heading_delta);
  i.reached_goal = j.at("reached_goal").get<bool>();
  i.died = j.at("died").get<bool>();
  i.jumped = j.at("jumped").get<bool>();
  i.truncated = j.at("truncated").get<bool>();
  i.prev_goal_distance = j.at("prev_goal_distance").get<double>();
  i.new_goal_distance = j.at("new_goal_distance").get<double>();
  i.initial_goal_distance = j.at("initial_goal_distance").get<double>();
  return i;
}

bool same_info(const navsim::StepInfo& a, const navsim::StepInfo& b) {
  return info_to_json(a) == info_to_json(b);
}

double duration_for(std::size_t steps) { return kSecondsPerStep * static_cast<double>(steps); }

}  // namespace

std::string to_string(Controller c) {
  switch (c) {
    case Controller::kHuman: return "human";
    case Controller::kSymbolic: return "symbolic";
    case Controller::kHybrid: return "hybrid";
    case Controller::kRewardShaping: return "reward_shaping";
    case Controller::kScriptedProxy: return "scripted_proxy";
  }
  return "unknown";
}

Controller controller_from_string(const std::string& s) {
  if (s == "human") return Controller::kHuman;
  if (s == "symbolic") return Controller::kSymbolic;
  if (s == "hybrid") return Controller::kHybrid;
  if (s == "reward_shaping") return Controller::kRewardShaping;
  if (s == "scripted_proxy") return Controller::kScriptedProxy;
  throw ConfigError("unknown controller: " + s);
}

Controller controller_for(ppo::AgentKind kind) {
  switch (kind) {
    case ppo::AgentKind::kSymbolic: return Controller::kSymbolic;
    case ppo::AgentKind::kHybrid: return Controller::kHybrid;
    case ppo::AgentKind::kRewardShaping: return Controller::kRewardShaping;
  }
  throw ConfigError("unknown agent kind");
}

bool is_human_side(Controller c) { return c == Controller::kHuman || c == Controller::kScriptedProxy; }

bool TrajectoryStep::operator==(const TrajectoryStep& o) const {
  return obs_digest == o.obs_digest && action == o.action && same_info(info, o.info) &&
         reward == o.reward && position.x == o.position.x && position.y == o.position.y &&
         heading == o.heading;
}

bool Trajectory::operator==(const Trajectory& o) const {
  return id == o.id && controller == o.controller && action_variant == o.action_variant &&
         goal_index == o.goal_index && seed == o.seed && map_fingerprint == o.map_fingerprint &&
         start_position.x == o.start_position.x && start_position.y == o.start_position.y &&
         start_heading == o.start_heading && steps == o.steps &&
         duration_seconds == o.duration_seconds && created_at == o.created_at &&
         post_processed == o.post_processed && trimmed_steps == o.trimmed_steps;
}

void Trajectory::validate() const {
  if (id.empty()) throw ValidationError("invalid_trajectory", "trajectory id is empty");
  if (goal_index < 0 || goal_index >= navsim::kGoalCount) {
    throw ValidationError("invalid_trajectory", id + ": goal_index out of range");
  }
  if (steps.empty()) throw ValidationError("invalid_trajectory", id + ": no steps");
  if (std::abs(duration_seconds - duration_for(steps.size())) > 1e-9) {
    throw ValidationError("invalid_trajectory", id + ": duration does not match step count");
  }
  if (trimmed_steps < 0 || (trimmed_steps > 0 && !post_processed)) {
    throw ValidationError("invalid_trajectory", id + ": inconsistent trim bookkeeping");
  }
  const navsim::StepInfo& last = steps.back().info;
  if (trimmed_steps == 0 && !(last.reached_goal || last.died || last.truncated)) {
    throw ValidationError("invalid_trajectory", id + ": last step is not terminal");
  }
}

std::string observation_digest(const navsim::Observation& obs) {
  std::string bytes;
  bytes.reserve((obs.symbolic.size() + obs.depth.size()) * sizeof(double));
  for (double v : obs.symbolic) bytes.append(reinterpret_cast<const char*>(&v), sizeof v);
  for (double v : obs.depth) bytes.append(reinterpret_cast<const char*>(&v), sizeof v);
  return io::hex64(fnv1a(bytes));
}

std::string to_jsonl(const Trajectory& t) {
  json header = {{"schema", "hntt.trajectory"},
                 {"version", kTrajectorySchemaVersion},
                 {"id", t.id},
                 {"controller", to_string(t.controller)},
                 {"action_variant", navsim::to_string(t.action_variant)},
                 {"goal_index", t.goal_index},
                 {"seed", t.seed},
                 {"map_fingerprint", io::hex64(t.map_fingerprint)},
                 {"start", {{"x", t.start_position.x}, {"y", t.start_position.y}, {"heading", t.start_heading}}},
                 {"step_count", t.steps.size()},
                 {"duration_seconds", t.duration_seconds},
                 {"created_at", t.created_at},
                 {"post_processed", t.post_processed},
                 {"trimmed_steps", t.trimmed_steps}};
  std::string out = header.dump() + "\n";
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const TrajectoryStep& s = t.steps[i];
    const json row = {{"t", i},
                      {"obs", s.obs_digest},
                      {"action", s.action},
                      {"reward", s.reward},
                      {"x", s.position.x},
                      {"y", s.position.y},
                      {"heading", s.heading},
                      {"info", info_to_json(s.info)}};
    out += row.dump();
    out += "\n";
  }
  return out;
}

Trajectory trajectory_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Trajectory t;
  try {
    if (!std::getline(in, line)) throw ValidationError("invalid_trajectory", "empty trajectory file");
    const json h = json::parse(line);
    if (h.value("schema", "") != "hntt.trajectory" || h.at("version").get<int>() != kTrajectorySchemaVersion) {
      throw ValidationError("invalid_trajectory", "unsupported trajectory schema");
    }
    t.id = h.at("id").get<std::string>();
    t.controller = controller_from_string(h.at("controller").get<std::string>());
    t.action_variant = navsim::action_variant_from_string(h.at("action_variant").get<std::string>());
    t.goal_index = h.at("goal_index").get<int>();
    t.seed = h.at("seed").get<std::uint64_t>();
    t.map_fingerprint = io::parse_hex64(h.at("map_fingerprint").get<std::string>());
    t.start_position = {h.at("start").at("x").get<double>(), h.at("start").at("y").get<double>()};
    t.start_heading = h.at("start").at("heading").get<double>();
    t.duration_seconds = h.at("duration_seconds").get<double>();
    t.created_at = h.at("created_at").get<std::string>();
    t.post_processed = h.at("post_processed").get<bool>();
    t.trimmed_steps = h.at("trimmed_steps").get<int>();
    const auto expected = h.at("step_count").get<std::size_t>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json r = json::parse(line);
      TrajectoryStep s;
      s.obs_digest = r.at("obs").get<std::string>();
      s.action = r.at("action").get<int>();
      s.reward = r.at("reward").get<double>();
      s.position = {r.at("x").get<double>(), r.at("y").get<double>()};
      s.heading = r.at("heading").get<double>();
      s.info = info_from_json(r.at("info"));
      t.steps.push_back(std::move(s));
    }
    if (t.steps.size() != expected) {
      throw ValidationError("invalid_trajectory", t.id + ": truncated file (" +
                                                      std::to_string(t.steps.size()) + " of " +
                                                      std::to_string(expected) + " steps)");
    }
  } catch (const json::exception& e) {
    throw ValidationError("invalid_trajectory", std::string("malformed trajectory: ") + e.what());
  }
  t.validate();
  return t;
}

json replay_json(const Trajectory& t) {
  json frames = json::array();
  frames.push_back({t.start_position.x, t.start_position.y, t.start_heading});
  for (const TrajectoryStep& s : t.steps) frames.push_back({s.position.x, s.position.y, s.heading});
  return {{"schema", "hntt.replay"},
          {"version", kReplaySchemaVersion},
          {"map_fingerprint", io::hex64(t.map_fingerprint)},
          {"goal_index", t.goal_index},
          {"seconds_per_step", kSecondsPerStep},
          {"duration_seconds", t.duration_seconds},
          {"frames", std::move(frames)}};
}

// ---------------------------------------------------------------------------
// Recording

Recorder::Recorder(std::shared_ptr<const navsim::WorldMap> map, navsim::ActionVariant variant,
                   Controller controller, const reward::RewardConfig& reward_cfg)
    : env_(std::move(map), variant), controller_(controller), reward_cfg_(reward_cfg) {}

const navsim::Observation& Recorder::reset(std::uint64_t seed, std::optional<int> goal) {
  obs_ = env_.reset(seed, goal);
  current_ = Trajectory{};
  current_.controller = controller_;
  current_.action_variant = env_.variant();
  current_.goal_index = env_.goal_index();
  current_.seed = seed;
  current_.map_fingerprint = env_.map().fingerprint();
  current_.start_position = env_.state().position;
  current_.start_heading = env_.state().heading;
  return obs_;
}

const navsim::StepResult& Recorder::step(int action) {
  TrajectoryStep s;
  s.obs_digest = observation_digest(obs_);
  s.action = action;
  last_ = env_.step(action);
  s.info = last_.info;
  s.reward = reward::reward(last_.info, reward_cfg_);
  s.position = env_.state().position;
  s.heading = env_.state().heading;
  current_.steps.push_back(std::move(s));
  obs_ = last_.observation;
  return last_;
}

Trajectory Recorder::finish(std::string id, std::string created_at) const {
  if (!env_.done()) throw ProtocolError("episode still running");
  Trajectory t = current_;
  t.id = std::move(id);
  t.created_at = std::move(created_at);
  t.duration_seconds = duration_for(t.steps.size());
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------
// Scripted proxy

ScriptedProxy::ScriptedProxy(std::shared_ptr<const navsim::WorldMap> map, ProxyParams params,
                             std::uint64_t seed)
    : map_(std::move(map)), params_(params), rng_(seed) {}

namespace {

std::vector<navsim::Vec2> plan(const navsim::WorldMap& map, navsim::Vec2 from, navsim::Vec2 to,
                               double clearance) {
  auto path = navsim::shortest_path(map, from, to, clearance);
  if (path.empty()) path = navsim::shortest_path(map, from, to, 1.0);
  if (path.empty()) path = {from, to};
  return path;
}

}  // namespace

void ScriptedProxy::begin_episode(const navsim::NavEnv& env) {
  const navsim::Vec2 p = env.state().position;
  steer_ = 0.0;
  next_ = 1;
  planned_main_ = !map_->on_island(p);
  if (planned_main_) {
    path_ = plan(*map_, p, env.goal(), params_.clearance);
    return;
  }
  // Head for the jump link whose landing leaves the shortest remaining route.
  double best = std::numeric_limits<double>::infinity();
  for (const navsim::JumpLink& link : map_->jump_links) {
    const auto rest = plan(*map_, link.to, env.goal(), params_.clearance);
    const double total = geom::distance(p, link.from) + navsim::path_length(rest);
    if (total < best) {
      best = total;
      path_ = {p, link.from};
    }
  }
}

int ScriptedProxy::act(const navsim::NavEnv& env) {
  const navsim::Vec2 p = env.state().position;
  if (!planned_main_ && !map_->on_island(p)) {
    planned_main_ = true;
    path_ = plan(*map_, p, env.goal(), params_.clearance);
    next_ = 1;
  }
  const double reach = 0.8 * map_->speed;
  while (next_ + 1 < path_.size() && geom::distance(p, path_[next_]) < reach) ++next_;
  const navsim::Vec2 target = path_[std::min(next_, path_.size() - 1)];

  const auto& actions = navsim::action_space(env.variant());
  if (uniform01(rng_) < params_.pause_probability) return 0;

  const navsim::Vec2 d = target - p;
  std::normal_distribution<double> noise(0.0, params_.heading_noise);
  const double desired = geom::wrap_angle(std::atan2(d.y, d.x) - env.state().heading) + noise(rng_);
  steer_ = params_.smoothing * steer_ + (1.0 - params_.smoothing) * desired;

  int best = 1;
  double best_err = std::abs(steer_);
  for (int i = 2; i < static_cast<int>(actions.size()); ++i) {
    const double err = std::abs(steer_ - actions[static_cast<std::size_t>(i)].heading_delta);
    if (err < best_err) {
      best_err = err;
      best = i;
    }
  }
  // The filter remembers the turn actually taken, not the one asked for.
  steer_ -= actions[static_cast<std::size_t>(best)].heading_delta;
  return best;
}

// ---------------------------------------------------------------------------
// Corpora

namespace {

std::string make_id(Controller c, std::uint64_t seed, int index, std::uint64_t map_fp) {
  const std::string key = to_string(c) + "|" + std::to_string(seed) + "|" + std::to_string(index) + "|" +
                          io::hex64(map_fp);
  return "t" + io::hex64(fnv1a(key));
}

}  // namespace

std::vector<Trajectory> rollout_corpus(const ppo::Agent& agent,
                                       std::shared_ptr<const navsim::WorldMap> map,
                                       const reward::RewardConfig& reward_cfg,
                                       const RolloutOptions& options) {
  if (options.n <= 0) throw ArgumentError("rollout: n must be > 0");
  if (!map) throw ConfigError("rollout: map required");
  if (map->fingerprint() != agent.map_fingerprint) {
    throw ConfigError("rollout: checkpoint was trained on a different map");
  }
  reward::RewardConfig rc = reward_cfg;
  rc.shaping_enabled = ppo::profile(agent.kind).shaping;
  const Controller controller = controller_for(agent.kind);
  Recorder rec(map, agent.actions(), controller, rc);
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(options.n));
  for (int i = 0; i < options.n; ++i) {
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(i)));
    const std::uint64_t episode_seed = rng();
    const navsim::Observation* obs = &rec.reset(episode_seed);
    while (!rec.done()) obs = &rec.step(agent.act(*obs, options.mode, rng)).observation;
    out.push_back(rec.finish(make_id(controller, options.seed, i, map->fingerprint()), options.created_at));
  }
  return out;
}

std::vector<Trajectory> proxy_corpus(std::shared_ptr<const navsim::WorldMap> map,
                                     const reward::RewardConfig& reward_cfg,
                                     const RolloutOptions& options, const ProxyParams& params) {
  if (options.n <= 0) throw ArgumentError("rollout: n must be > 0");
  Recorder rec(map, navsim::ActionVariant::kShaped14, Controller::kScriptedProxy, reward_cfg);
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(options.n));
  for (int i = 0; i < options.n; ++i) {
    const std::uint64_t s = derive_seed(options.seed, static_cast<std::uint64_t>(i));
    rec.reset(s);
    ScriptedProxy proxy(map, params, derive_seed(s, 1));
    proxy.begin_episode(rec.env());
    while (!rec.done()) rec.step(proxy.act(rec.env()));
    out.push_back(rec.finish(make_id(Controller::kScriptedProxy, options.seed, i, map->fingerprint()),
                             options.created_at));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Filtering and pairing

std::vector<Trajectory> filter_and_postprocess(const std::vector<Trajectory>& corpus,
                                               const FilterOptions& options) {
  const int trim = static_cast<int>(std::lround(options.human_trim_seconds / kSecondsPerStep));
  std::vector<Trajectory> out;
  for (const Trajectory& t : corpus) {
    if (t.duration_seconds < options.min_duration_seconds - 1e-9) continue;
    Trajectory kept = t;
    if (is_human_side(t.controller) && !t.post_processed) {
      const int remove = std::min(trim, t.step_count() - 1);
      kept.steps.resize(static_cast<std::size_t>(t.step_count() - remove));
      kept.trimmed_steps = remove;
      kept.post_processed = true;
      kept.duration_seconds = duration_for(kept.steps.size());
    }
    out.push_back(std::move(kept));
  }
  return out;
}

std::string to_string(Slot s) { return s == Slot::kA ? "A" : "B"; }

Slot slot_from_string(const std::string& s) {
  if (s == "A") return Slot::kA;
  if (s == "B") return Slot::kB;
  throw ValidationError("invalid_choice", "slot must be \"A\" or \"B\", got \"" + s + "\"");
}

void TrialPair::validate(double min_duration_seconds) const {
  auto fail = [&](const std::string& why) {
    throw ValidationError("invalid_trial_pair", "pair " + pair_id + ": " + why);
  };
  if (pair_id.empty()) fail("empty id");
  if (video_a.empty() || video_b.empty() || video_a == video_b) fail("videos must be two distinct trajectories");
  if (goal_a != goal_index || goal_b != goal_index) fail("trajectories do not share the goal");
  if (goal_index < 0 || goal_index >= navsim::kGoalCount) fail("goal out of range");
  const bool a_human = is_human_side(controller_a);
  const bool b_human = is_human_side(controller_b);
  if (a_human == b_human) fail("exactly one video must be human-controlled");
  if ((human_slot == Slot::kA) != a_human) fail("human_slot does not point at the human video");
  if (duration_a < min_duration_seconds - 1e-9 || duration_b < min_duration_seconds - 1e-9) {
    fail("both videos must last at least " + std::to_string(min_duration_seconds) + " s");
  }
}

nlohmann::json to_json(const TrialPair& p) {
  return {{"pair_id", p.pair_id},
          {"video_a", p.video_a},
          {"video_b", p.video_b},
          {"human_slot", to_string(p.human_slot)},
          {"goal_index", p.goal_index},
          {"controller_a", to_string(p.controller_a)},
          {"controller_b", to_string(p.controller_b)},
          {"duration_a", p.duration_a},
          {"duration_b", p.duration_b},
          {"goal_a", p.goal_a},
          {"goal_b", p.goal_b}};
}

TrialPair trial_pair_from_json(const nlohmann::json& j) {
  TrialPair p;
  try {
    p.pair_id = j.at("pair_id").get<std::string>();
    p.video_a = j.at("video_a").get<std::string>();
    p.video_b = j.at("video_b").get<std::string>();
    p.human_slot = slot_from_string(j.at("human_slot").get<std::string>());
    p.goal_index = j.at("goal_index").get<int>();
    p.controller_a = controller_from_string(j.at("controller_a").get<std::string>());
    p.controller_b = controller_from_string(j.at("controller_b").get<std::string>());
    p.duration_a = j.at("duration_a").get<double>();
    p.duration_b = j.at("duration_b").get<double>();
    p.goal_a = j.at("goal_a").get<int>();
    p.goal_b = j.at("goal_b").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid_trial_pair", std::string("malformed trial pair: ") + e.what());
  }
  p.validate();
  return p;
}

TrialPair make_pair(const Trajectory& human, const Trajectory& agent, std::string pair_id) {
  TrialPair p;
  p.pair_id = std::move(pair_id);
  p.video_a = human.id;
  p.video_b = agent.id;
  p.human_slot = Slot::kA;
  p.goal_index = human.goal_index;
  p.controller_a = human.controller;
  p.controller_b = agent.controller;
  p.duration_a = human.duration_seconds;
  p.duration_b = agent.duration_seconds;
  p.goal_a = human.goal_index;
  p.goal_b = agent.goal_index;
  return p;
}

std::vector<TrialPair> pair_by_goal(const std::vector<Trajectory>& human_corpus,
                                    const std::vector<Trajectory>& agent_corpus, int n_pairs,
                                    Rng& rng, double min_duration_seconds) {
  if (n_pairs <= 0) throw ArgumentError("pair_by_goal: n_pairs must be > 0");
  std::vector<std::vector<const Trajectory*>> humans(navsim::kGoalCount), agents(navsim::kGoalCount);
  for (const Trajectory& t : human_corpus) {
    if (is_human_side(t.controller) && t.duration_seconds >= min_duration_seconds - 1e-9) {
      humans[static_cast<std::size_t>(t.goal_index)].push_back(&t);
    }
  }
  for (const Trajectory& t : agent_corpus) {
    if (!is_human_side(t.controller) && t.duration_seconds >= min_duration_seconds - 1e-9) {
      agents[static_cast<std::size_t>(t.goal_index)].push_back(&t);
    }
  }

  auto deficiency = [&]() {
    std::string msg;
    for (int g = 0; g < navsim::kGoalCount; ++g) {
      const auto gi = static_cast<std::size_t>(g);
      if (!humans[gi].empty() && !agents[gi].empty()) continue;
      msg += " goal " + std::to_string(g) + " (" +
             (humans[gi].empty() && agents[gi].empty() ? "no eligible trajectories"
              : humans[gi].empty()                     ? "no eligible human trajectory"
                                                       : "no eligible agent trajectory") +
             ");";
    }
    return msg;
  };

  std::vector<TrialPair> out;
  while (static_cast<int>(out.size()) < n_pairs) {
    std::vector<int> goals;
    for (int g = 0; g < navsim::kGoalCount; ++g) {
      if (!humans[static_cast<std::size_t>(g)].empty() && !agents[static_cast<std::size_t>(g)].empty()) goals.push_back(g);
    }
    if (goals.empty()) {
      throw ValidationError("pairing_infeasible", "cannot build " + std::to_string(n_pairs) +
                                                      " goal-matched pairs (built " +
                                                      std::to_string(out.size()) + "); deficient:" +
                                                      deficiency());
    }
    hntt::shuffle(goals.begin(), goals.end(), rng);
    const std::size_t take = std::min(goals.size(), static_cast<std::size_t>(n_pairs) - out.size());
    for (std::size_t k = 0; k < take; ++k) {
      const auto g = static_cast<std::size_t>(goals[k]);
      auto pick = [&](std::vector<const Trajectory*>& bucket) {
        const auto i = static_cast<std::size_t>(uniform_index(rng, bucket.size()));
        const Trajectory* t = bucket[i];
        bucket.erase(bucket.begin() + static_cast<std::ptrdiff_t>(i));
        return t;
      };
      const Trajectory* h = pick(humans[g]);
      const Trajectory* a = pick(agents[g]);
      out.push_back(make_pair(*h, *a, "p" + io::hex64(fnv1a(h->id + "|" + a->id))));
      out.back().validate(min_duration_seconds);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

TrajectoryStore::TrajectoryStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

void TrajectoryStore::write_index(const std::vector<std::string>& ids) const {
  io::write_atomic(root_ / "index.json", json{{"schema", "hntt.corpus"}, {"version", 1}, {"ids", ids}}.dump(1) + "\n");
}

void TrajectoryStore::put(const Trajectory& t) { put_all({t}); }

void TrajectoryStore::put_all(const std::vector<Trajectory>& corpus) {
  std::vector<std::string> index = ids();
  std::set<std::string> known(index.begin(), index.end());
  for (const Trajectory& t : corpus) {
    t.validate();
    io::write_atomic(root_ / (t.id + ".jsonl"), to_jsonl(t));
    if (known.insert(t.id).second) index.push_back(t.id);
  }
  write_index(index);
}

bool TrajectoryStore::contains(const std::string& id) const {
  const auto all = ids();
  return std::find(all.begin(), all.end(), id) != all.end();
}

Trajectory TrajectoryStore::get(const std::string& id) const {
  if (!contains(id)) throw NotFoundError("trajectory " + id + " not in store " + root_.string());
  return trajectory_from_jsonl(io::read_file(root_ / (id + ".jsonl")));
}

std::vector<std::string> TrajectoryStore::ids() const {
  const auto path = root_ / "index.json";
  if (!std::filesystem::exists(path)) return {};
  try {
    return json::parse(io::read_file(path)).at("ids").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError("corrupt corpus index " + path.string() + ": " + e.what());
  }
}

std::vector<Trajectory> TrajectoryStore::load_all() const {
  std::vector<Trajectory> out;
  for (const std::string& id : ids()) out.push_back(trajectory_from_jsonl(io::read_file(root_ / (id + ".jsonl"))));
  return out;
}

void save_pairs(const std::vector<TrialPair>& pairs, const std::filesystem::path& path) {
  json arr = json::array();
  for (const TrialPair& p : pairs) {
    p.validate();
    arr.push_back(to_json(p));
  }
  io::write_atomic(path, json{{"schema", "hntt.pairs"}, {"version", 1}, {"pairs", arr}}.dump(2) + "\n");
}

std::vector<TrialPair> load_pairs(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("invalid_trial_pair", "malformed pairs file " + path.string() + ": " + e.what());
  }
  std::vector<TrialPair> out;
  for (const json& j : doc.at("pairs")) out.push_back(trial_pair_from_json(j));
  return out;
}

}  // namespace hntt::traj
