#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hntt/navsim.hpp"
#include "hntt/nn.hpp"
#include "hntt/reward.hpp"

namespace hntt::ppo {

using nn::Matrix;
using nn::Vector;

enum class AgentKind { kSymbolic, kHybrid, kRewardShaping };

std::string to_string(AgentKind kind);
AgentKind agent_kind_from_string(const std::string& s);

// What each agent kind sees, how it acts and what it is rewarded for.
struct AgentProfile {
  bool uses_depth;
  navsim::ActionVariant actions;
  bool shaping;
};
AgentProfile profile(AgentKind kind);

struct PPOConfig {
  int batch_size = 2048;
  double learning_rate = 2.5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_range = 0.2;
  double grad_norm_clip = 0.5;
  double entropy_coef = 0.0;
  double value_coef = 0.5;
  int minibatches_per_update = 4;
  int epochs_per_update = 4;
  double dropout_rate = 0.1;
  bool normalize_advantages = true;
  int replay_batches = 5;  // diagnostics-only FIFO of recent batches
  int hidden = 128;
  std::int64_t total_steps = 2'000'000;
  std::int64_t eval_interval = 20'480;
  int curve_window = 200;  // episodes in the rolling learning-curve mean
  int workers = 8;
  std::uint64_t seed = 0;

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

nlohmann::json to_json(const PPOConfig& cfg);
PPOConfig ppo_config_from_json(const nlohmann::json& j, PPOConfig base = {});

// Maps raw observations to the network's input column.
class FeatureEncoder {
 public:
  FeatureEncoder() = default;
  FeatureEncoder(const navsim::WorldMap& map, bool use_depth);

  static constexpr int kSymbolicFeatures = 15;
  int size() const { return kSymbolicFeatures + depth_size_; }
  int depth_size() const { return depth_size_; }

  void encode(const navsim::Observation& obs, double* out) const;
  Vector encode(const navsim::Observation& obs) const;

 private:
  double distance_scale_ = 1.0;
  double jump_scale_ = 1.0;
  double speed_ = 1.0;
  navsim::Vec2 centre_;
  navsim::Vec2 half_extent_{1.0, 1.0};
  double depth_range_ = 1.0;
  int depth_size_ = 0;
};

nn::NetShape network_shape(const FeatureEncoder& enc, navsim::ActionVariant actions, int hidden);

// Per-step arrays of a collected batch, all of length N. Observations are
// stored already encoded, one column per step.
struct RolloutBatch {
  Matrix observations;
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return actions.size(); }
};

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Generalised advantage estimation over one contiguous stream of steps.
// dones[t] marks that the episode ended after step t; bootstrap_value is
// V(s_T) for the state following the last step.
Advantages gae(std::span<const double> rewards, std::span<const double> values,
               std::span<const std::uint8_t> dones, double bootstrap_value, double gamma,
               double lambda);

struct LossDiagnostics {
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

struct LossResult {
  LossDiagnostics diag;
  Vector gradient;  // empty unless requested
};

// Clipped-surrogate loss over the columns `indices` of `batch`. Dropout
// masks are drawn from `dropout_seed` so the loss is a deterministic
// function of the parameters.
LossResult ppo_loss(const RolloutBatch& batch, std::span<const int> indices,
                    const nn::PolicyNetwork& net, const PPOConfig& cfg,
                    std::uint64_t dropout_seed, bool with_gradient);

enum class ActMode { kStochastic, kDeterministic };

int act(const nn::PolicyNetwork& net, const Vector& features, ActMode mode, std::mt19937_64& rng);

// Softmax probabilities for one encoded observation.
Vector action_probabilities(const nn::PolicyNetwork& net, const Vector& features);

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr, double beta1, double beta2, double eps);
  void step(Vector& params, const Vector& grad);

 private:
  Vector m_, v_;
  double lr_ = 0, beta1_ = 0, beta2_ = 0, eps_ = 0;
  std::int64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Agents and checkpoints

struct Agent {
  AgentKind kind = AgentKind::kSymbolic;
  FeatureEncoder encoder;
  nn::PolicyNetwork net;
  std::uint64_t map_fingerprint = 0;
  std::uint64_t config_hash = 0;
  std::int64_t trained_steps = 0;

  navsim::ActionVariant actions() const { return profile(kind).actions; }
  int act(const navsim::Observation& obs, ActMode mode, std::mt19937_64& rng) const;
};

Agent make_agent(AgentKind kind, const navsim::WorldMap& map, int hidden, std::uint64_t seed);

inline constexpr int kCheckpointVersion = 2;
void save_checkpoint(const Agent& agent, const std::filesystem::path& path);
// `map` (when given) must match the map the agent was trained on.
Agent load_checkpoint(const std::filesystem::path& path, const navsim::WorldMap* map = nullptr);

std::uint64_t config_hash(AgentKind kind, const PPOConfig& cfg, const reward::RewardConfig& rc);

// ---------------------------------------------------------------------------
// Training and evaluation

struct CurvePoint {
  std::int64_t step = 0;
  double mean_episode_length = 0.0;
  double success_rate = 0.0;
};

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path);
std::vector<CurvePoint> read_curve_csv(const std::filesystem::path& path);

struct UpdateStats {
  std::int64_t step = 0;
  LossDiagnostics diag;
  double replay_value_mse = 0.0;  // current critic on the replay FIFO
};

struct TrainOptions {
  std::filesystem::path out_dir;  // empty = no files written
  std::int64_t checkpoint_interval = 0;  // steps; 0 = final checkpoint only
  std::function<void(const UpdateStats&, const CurvePoint*)> on_update;
};

struct TrainResult {
  Agent agent;
  std::vector<CurvePoint> curve;
  std::vector<std::filesystem::path> checkpoints;
};

TrainResult train(AgentKind kind, const PPOConfig& cfg,
                  std::shared_ptr<const navsim::WorldMap> map,
                  const reward::RewardConfig& reward_cfg, const TrainOptions& options = {});

struct EpisodeRecord {
  int goal_index = 0;
  int length = 0;
  bool success = false;
  bool died = false;
  double mean_abs_heading_delta = 0.0;
  int collisions = 0;
  double total_reward = 0.0;
};

struct EvalSummary {
  std::vector<EpisodeRecord> episodes;
  double success_rate = 0.0;
  double mean_length = 0.0;
  double mean_abs_heading_delta = 0.0;  // per step, over all steps
  double collision_rate = 0.0;  // collisions per step, over all steps
};

// Runs `episodes` episodes; with `goals` empty the goal is drawn at reset,
// otherwise episode i uses goals[i % goals.size()].
EvalSummary evaluate(const Agent& agent, std::shared_ptr<const navsim::WorldMap> map,
                     const reward::RewardConfig& reward_cfg, int episodes, ActMode mode,
                     std::uint64_t seed, const std::vector<int>& goals = {});

}  // namespace hntt::ppo
