#include "hntt/reward.hpp"

#include <algorithm>
#include <cmath>

#include "hntt/error.hpp"

namespace hntt::reward {

void RewardConfig::validate() const {
  if (step_penalty > 0 || death_penalty > 0 || camera_penalty_scale > 0 ||
      collision_penalty > 0 || slow_penalty > 0) {
    throw ConfigError("reward: penalty fields must be <= 0");
  }
  if (!(goal_reward > 0)) throw ConfigError("reward: goal_reward must be > 0");
  if (!(camera_threshold > 0) || !(slow_threshold > 0)) {
    throw ConfigError("reward: thresholds must be > 0");
  }
  if (normalizing_distance < 0) throw ConfigError("reward: normalizing_distance must be >= 0");
}

nlohmann::json to_json(const RewardConfig& c) {
  return {{"step_penalty", c.step_penalty},
          {"death_penalty", c.death_penalty},
          {"goal_reward", c.goal_reward},
          {"approach_scale", c.approach_scale},
          {"normalizing_distance", c.normalizing_distance},
          {"camera_threshold", c.camera_threshold},
          {"camera_penalty_scale", c.camera_penalty_scale},
          {"collision_penalty", c.collision_penalty},
          {"slow_threshold", c.slow_threshold},
          {"slow_penalty", c.slow_penalty},
          {"shaping_enabled", c.shaping_enabled}};
}

RewardConfig reward_config_from_json(const nlohmann::json& j, RewardConfig c) {
  c.step_penalty = j.value("step_penalty", c.step_penalty);
  c.death_penalty = j.value("death_penalty", c.death_penalty);
  c.goal_reward = j.value("goal_reward", c.goal_reward);
  c.approach_scale = j.value("approach_scale", c.approach_scale);
  c.normalizing_distance = j.value("normalizing_distance", c.normalizing_distance);
  c.camera_threshold = j.value("camera_threshold", c.camera_threshold);
  c.camera_penalty_scale = j.value("camera_penalty_scale", c.camera_penalty_scale);
  c.collision_penalty = j.value("collision_penalty", c.collision_penalty);
  c.slow_threshold = j.value("slow_threshold", c.slow_threshold);
  c.slow_penalty = j.value("slow_penalty", c.slow_penalty);
  c.shaping_enabled = j.value("shaping_enabled", c.shaping_enabled);
  c.validate();
  return c;
}

double approach_term(const navsim::StepInfo& info, const RewardConfig& cfg) {
  const double norm =
      cfg.normalizing_distance > 0 ? cfg.normalizing_distance : info.initial_goal_distance;
  if (!(norm > 0)) return 0.0;
  return cfg.approach_scale * (info.prev_goal_distance - info.new_goal_distance) / norm;
}

double base_reward(const navsim::StepInfo& info, const RewardConfig& cfg) {
  double r = cfg.step_penalty + approach_term(info, cfg);
  if (info.died) r += cfg.death_penalty;
  if (info.reached_goal) r += cfg.goal_reward;
  return r;
}

double camera_term(const navsim::StepInfo& info, const RewardConfig& cfg) {
  const double excess = std::abs(info.heading_delta) - cfg.camera_threshold;
  return excess > 0 ? cfg.camera_penalty_scale * excess : 0.0;
}

double collision_term(const navsim::StepInfo& info, const RewardConfig& cfg) {
  return info.collided_wall ? cfg.collision_penalty : 0.0;
}

double slow_term(const navsim::StepInfo& info, const RewardConfig& cfg) {
  return (info.recent_travel < cfg.slow_threshold && !info.reached_goal) ? cfg.slow_penalty : 0.0;
}

double shaped_reward(const navsim::StepInfo& info, const RewardConfig& cfg) {
  const double base = base_reward(info, cfg);
  if (!cfg.shaping_enabled) return base;
  return base + camera_term(info, cfg) + collision_term(info, cfg) + slow_term(info, cfg);
}

}  // namespace hntt::reward
