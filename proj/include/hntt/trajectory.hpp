#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hntt/navsim.hpp"
#include "hntt/ppo.hpp"
#include "hntt/reward.hpp"
#include "hntt/rng.hpp"

namespace hntt::traj {

inline constexpr double kSecondsPerStep = 0.2;
inline constexpr int kTrajectorySchemaVersion = 1;
inline constexpr int kReplaySchemaVersion = 1;

enum class Controller { kHuman, kSymbolic, kHybrid, kRewardShaping, kScriptedProxy };

std::string to_string(Controller c);
Controller controller_from_string(const std::string& s);
Controller controller_for(ppo::AgentKind kind);
// Human players and the scripted proxy that stands in for them headlessly.
bool is_human_side(Controller c);

struct TrajectoryStep {
  std::string obs_digest;  // fnv1a of the pre-step observation
  int action = 0;
  navsim::StepInfo info;
  double reward = 0.0;
  navsim::Vec2 position;  // after the step
  double heading = 0.0;

  bool operator==(const TrajectoryStep&) const;
};

struct Trajectory {
  std::string id;
  Controller controller = Controller::kHuman;
  navsim::ActionVariant action_variant = navsim::ActionVariant::kShaped14;
  int goal_index = 0;
  std::uint64_t seed = 0;
  std::uint64_t map_fingerprint = 0;
  navsim::Vec2 start_position;
  double start_heading = 0.0;
  std::vector<TrajectoryStep> steps;
  double duration_seconds = 0.0;
  std::string created_at;
  bool post_processed = false;
  int trimmed_steps = 0;  // tail steps removed by post-processing

  int step_count() const { return static_cast<int>(steps.size()); }
  // Throws ValidationError on a broken invariant.
  void validate() const;
  bool operator==(const Trajectory&) const;
};

std::string observation_digest(const navsim::Observation& obs);

// JSON-lines: a header record followed by one record per step.
std::string to_jsonl(const Trajectory& t);
Trajectory trajectory_from_jsonl(const std::string& text);

// Compact positions+headings document consumed by the replay renderer.
// Carries no trajectory id or controller.
nlohmann::json replay_json(const Trajectory& t);

// ---------------------------------------------------------------------------
// Recording

// Drives an environment one action at a time and records the episode.
class Recorder {
 public:
  Recorder(std::shared_ptr<const navsim::WorldMap> map, navsim::ActionVariant variant,
           Controller controller, const reward::RewardConfig& reward_cfg);

  const navsim::Observation& reset(std::uint64_t seed, std::optional<int> goal = std::nullopt);
  const navsim::StepResult& step(int action);
  bool done() const { return env_.done(); }
  const navsim::NavEnv& env() const { return env_; }
  // Finished episode; throws ProtocolError while the episode is running.
  Trajectory finish(std::string id, std::string created_at) const;

 private:
  navsim::NavEnv env_;
  Controller controller_;
  reward::RewardConfig reward_cfg_;
  Trajectory current_;
  navsim::Observation obs_;
  navsim::StepResult last_;
};

// Waypoint follower standing in for a human player in headless runs:
// plans with generous wall clearance, steers through a low-pass filter
// with small heading noise and snaps to the nearest Shaped14 turn.
struct ProxyParams {
  double clearance = 90.0;
  double smoothing = 0.55;  // weight kept on the previous steering command
  double heading_noise = 0.06;  // radians, standard deviation
  double pause_probability = 0.02;  // occasional hesitation (no-op)
};

class ScriptedProxy {
 public:
  ScriptedProxy(std::shared_ptr<const navsim::WorldMap> map, ProxyParams params, std::uint64_t seed);
  void begin_episode(const navsim::NavEnv& env);
  int act(const navsim::NavEnv& env);

 private:
  std::shared_ptr<const navsim::WorldMap> map_;
  ProxyParams params_;
  Rng rng_;
  std::vector<navsim::Vec2> path_;
  std::size_t next_ = 0;
  double steer_ = 0.0;
  bool planned_main_ = false;
};

struct RolloutOptions {
  int n = 100;
  ppo::ActMode mode = ppo::ActMode::kStochastic;
  std::uint64_t seed = 0;
  std::string created_at;
};

std::vector<Trajectory> rollout_corpus(const ppo::Agent& agent,
                                       std::shared_ptr<const navsim::WorldMap> map,
                                       const reward::RewardConfig& reward_cfg,
                                       const RolloutOptions& options);

std::vector<Trajectory> proxy_corpus(std::shared_ptr<const navsim::WorldMap> map,
                                     const reward::RewardConfig& reward_cfg,
                                     const RolloutOptions& options, const ProxyParams& params = {});

// ---------------------------------------------------------------------------
// Filtering and pairing

struct FilterOptions {
  double min_duration_seconds = 10.0;  // inclusive
  double human_trim_seconds = 1.0;
};

std::vector<Trajectory> filter_and_postprocess(const std::vector<Trajectory>& corpus,
                                               const FilterOptions& options = {});

enum class Slot { kA, kB };
std::string to_string(Slot s);
Slot slot_from_string(const std::string& s);

struct TrialPair {
  std::string pair_id;
  std::string video_a;
  std::string video_b;
  Slot human_slot = Slot::kA;
  int goal_index = 0;
  // Copied from the trajectories so the pair can be validated on its own.
  Controller controller_a = Controller::kHuman;
  Controller controller_b = Controller::kHuman;
  double duration_a = 0.0;
  double duration_b = 0.0;
  int goal_a = 0;
  int goal_b = 0;

  void validate(double min_duration_seconds = 10.0) const;
  bool operator==(const TrialPair&) const = default;
};

nlohmann::json to_json(const TrialPair& p);
// Validates before returning.
TrialPair trial_pair_from_json(const nlohmann::json& j);

TrialPair make_pair(const Trajectory& human, const Trajectory& agent, std::string pair_id);

// Goal-matched pairs, goals without replacement while enough goals have
// eligible trajectories on both sides. Throws ValidationError
// ("pairing_infeasible") naming the deficient goals.
std::vector<TrialPair> pair_by_goal(const std::vector<Trajectory>& human_corpus,
                                    const std::vector<Trajectory>& agent_corpus, int n_pairs,
                                    Rng& rng, double min_duration_seconds = 10.0);

// ---------------------------------------------------------------------------
// Persistence

// Directory of <id>.jsonl files plus an index.json listing ids in order.
// Writes are atomic per file; the index is written last so readers never
// see a listed trajectory that is not yet on disk.
class TrajectoryStore {
 public:
  explicit TrajectoryStore(std::filesystem::path root);

  void put(const Trajectory& t);
  void put_all(const std::vector<Trajectory>& corpus);
  Trajectory get(const std::string& id) const;
  bool contains(const std::string& id) const;
  std::vector<std::string> ids() const;
  std::vector<Trajectory> load_all() const;
  const std::filesystem::path& root() const { return root_; }

 private:
  void write_index(const std::vector<std::string>& ids) const;
  std::filesystem::path root_;
};

void save_pairs(const std::vector<TrialPair>& pairs, const std::filesystem::path& path);
std::vector<TrialPair> load_pairs(const std::filesystem::path& path);

}  // namespace hntt::traj
