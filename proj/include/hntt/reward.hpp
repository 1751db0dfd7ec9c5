#pragma once

#include <json.hpp>

#include "hntt/navsim.hpp"

namespace hntt::reward {

struct RewardConfig {
  double step_penalty = -0.01;
  double death_penalty = -1.0;
  double goal_reward = 1.0;
  double approach_scale = 1.0;
  // Distance that normalises the approach term. Zero means "use the
  // episode's initial goal distance" carried in StepInfo.
  double normalizing_distance = 0.0;
  double camera_threshold = 0.15;  // radians of heading change per step
  double camera_penalty_scale = -0.05;  // per radian above the threshold
  double collision_penalty = -0.05;
  double slow_threshold = 220.0;  // map units over a two-step window
  double slow_penalty = -0.01;
  bool shaping_enabled = false;

  // Throws ConfigError unless penalties are <= 0, goal_reward > 0 and
  // thresholds > 0.
  void validate() const;
};

nlohmann::json to_json(const RewardConfig& cfg);
RewardConfig reward_config_from_json(const nlohmann::json& j, RewardConfig base = {});

// Potential-based progress term: scale * (prev - new) / D_norm.
double approach_term(const navsim::StepInfo& info, const RewardConfig& cfg);

double base_reward(const navsim::StepInfo& info, const RewardConfig& cfg);

// Individual shaping terms, exposed so callers can attribute reward.
double camera_term(const navsim::StepInfo& info, const RewardConfig& cfg);
double collision_term(const navsim::StepInfo& info, const RewardConfig& cfg);
double slow_term(const navsim::StepInfo& info, const RewardConfig& cfg);

// base_reward plus the three shaping terms; identical to base_reward when
// shaping is disabled.
double shaped_reward(const navsim::StepInfo& info, const RewardConfig& cfg);

// Dispatches on cfg.shaping_enabled.
inline double reward(const navsim::StepInfo& info, const RewardConfig& cfg) {
  return cfg.shaping_enabled ? shaped_reward(info, cfg) : base_reward(info, cfg);
}

}  // namespace hntt::reward
