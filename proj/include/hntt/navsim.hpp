#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "hntt/geometry.hpp"

namespace hntt::navsim {

using geom::Polygon;
using geom::Rect;
using geom::Segment;
using geom::Vec2;

inline constexpr int kGoalCount = 16;
inline constexpr int kMapSchemaVersion = 1;

struct JumpLink {
  Vec2 from;  // trigger centre, on the island ledge
  Vec2 to;    // landing point in the main region
  double trigger_radius = 150.0;
};

struct DepthSensor {
  int rays = 32;
  double max_range = 2000.0;
  double fov = std::numbers::pi;  // radians, centred on heading
};

// Static geometry of the navigation task. Immutable once validated, so a
// single instance can be shared by any number of environments.
struct WorldMap {
  std::string name = "unnamed";
  Rect bounds;
  Rect main_region;  // walled; leaving it is impossible
  Rect spawn_island;  // leaving it anywhere but a jump link is a fall
  Rect spawn_box;     // spawn positions are drawn uniformly from here
  std::vector<Polygon> obstacles;
  std::vector<JumpLink> jump_links;
  std::vector<Vec2> goal_anchors;
  double goal_radius = 150.0;
  double speed = 110.0;
  int max_steps = 300;
  DepthSensor depth;

  // Throws ConfigError naming the first violated invariant.
  void validate() const;

  // Collision geometry: every obstacle edge plus the main-region boundary.
  std::vector<Segment> walls() const;

  bool in_free_space(Vec2 p) const;
  bool on_island(Vec2 p) const { return spawn_island.contains(p); }

  std::uint64_t fingerprint() const;
};

nlohmann::json map_to_json(const WorldMap& map);
WorldMap map_from_json(const nlohmann::json& j);
WorldMap load_map(const std::filesystem::path& path);
void save_map(const WorldMap& map, const std::filesystem::path& path);

// The canonical map shipped as data/default_map.json.
WorldMap default_map();

// ---------------------------------------------------------------------------
// Actions

enum class ActionVariant { kBaseline8, kShaped14 };

struct ActionEntry {
  std::string label;
  double heading_delta;  // radians, positive = left (counter-clockwise)
  bool move;
};

// Index 0 = no-op, 1 = forward, then left turns ascending, then right turns
// ascending. Every turn also advances one step.
const std::vector<ActionEntry>& action_space(ActionVariant variant);
std::string to_string(ActionVariant v);
ActionVariant action_variant_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Observations and step results

// Symbolic layout, version 1. Distances in map units, angles in radians,
// agent-frame vectors have +x along the heading.
enum SymbolicIndex : int {
  kGoalDx = 0,
  kGoalDy,
  kGoalDistance,
  kHeading,
  kLastDisplacement,
  kOnIsland,
  kJumpDx,
  kJumpDy,
  kPosX,
  kPosY,
  kSymbolicSize
};
inline constexpr int kSymbolicVersion = 1;

struct Observation {
  std::vector<double> symbolic;
  std::vector<double> depth;  // each entry in (0, max_range]
};

struct StepInfo {
  bool collided_wall = false;
  double displacement = 0.0;  // walked distance this step (pre-teleport)
  double recent_travel = 0.0;  // walked distance over this and the previous step
  double heading_delta = 0.0;
  double abs_heading_delta = 0.0;
  bool reached_goal = false;
  bool died = false;
  bool jumped = false;
  bool truncated = false;  // step budget exhausted
  double prev_goal_distance = 0.0;
  double new_goal_distance = 0.0;
  double initial_goal_distance = 0.0;  // goal distance at reset
};

struct AgentState {
  Vec2 position;
  double heading = 0.0;  // [-pi, pi)
  double speed = 0.0;
  bool alive = true;
  int steps_elapsed = 0;
};

struct StepResult {
  Observation observation;
  StepInfo info;
  bool done = false;
};

class NavEnv {
 public:
  NavEnv(std::shared_ptr<const WorldMap> map, ActionVariant variant);

  Observation reset(std::uint64_t seed, std::optional<int> goal_index = std::nullopt);
  StepResult step(int action_index);

  const AgentState& state() const { return state_; }
  int goal_index() const { return goal_index_; }
  Vec2 goal() const { return map_->goal_anchors[static_cast<std::size_t>(goal_index_)]; }
  bool done() const { return done_; }
  ActionVariant variant() const { return variant_; }
  int action_count() const { return static_cast<int>(actions_->size()); }
  const WorldMap& map() const { return *map_; }
  const std::shared_ptr<const WorldMap>& map_ptr() const { return map_; }

  Observation observe() const;

 private:
  std::shared_ptr<const WorldMap> map_;
  ActionVariant variant_;
  const std::vector<ActionEntry>* actions_;
  std::vector<Segment> walls_;
  AgentState state_;
  int goal_index_ = 0;
  double initial_goal_distance_ = 0.0;
  double last_displacement_ = 0.0;
  bool done_ = true;
  bool started_ = false;
};

// Ray-cast distances from `origin` against `walls`, clamped to max_range.
std::vector<double> cast_depth(const std::vector<Segment>& walls, Vec2 origin,
                               double heading, const DepthSensor& sensor);

// Moves a point by `delta`, clipping against walls and sliding along the
// first wall hit. Returns the end point and whether a wall was touched.
struct MoveResult {
  Vec2 end;
  Vec2 contact;  // end of the first leg (equals end when no collision)
  bool collided = false;
};
MoveResult move_with_walls(const std::vector<Segment>& walls, Vec2 from, Vec2 delta);

// ---------------------------------------------------------------------------
// Shortest paths

// Shortest collision-free polyline between two points over the visibility
// graph of obstacle vertices pushed outward by `clearance`. Returns the
// waypoints including both ends; empty when unreachable.
std::vector<Vec2> shortest_path(const WorldMap& map, Vec2 from, Vec2 to,
                                double clearance = 1.0);
double path_length(const std::vector<Vec2>& path);

// Minimal step count from the best jump-link landing to goal `goal_index`.
int shortest_path_steps(const WorldMap& map, int goal_index);

}  // namespace hntt::navsim
