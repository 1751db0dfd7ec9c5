#include "hntt/navsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

#include "hntt/error.hpp"
#include "hntt/io.hpp"
#include "hntt/rng.hpp"

namespace hntt::navsim {
namespace {

using nlohmann::json;

constexpr double kBackoff = 1e-3;  // map units kept between agent and a wall after contact
constexpr double kDegree = std::numbers::pi / 180.0;

json point_json(Vec2 p) { return json::array({p.x, p.y}); }

Vec2 point_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("map: point must be [x, y]");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

json rect_json(const Rect& r) { return {{"lo", point_json(r.lo)}, {"hi", point_json(r.hi)}}; }

Rect rect_from(const json& j) { return {point_from(j.at("lo")), point_from(j.at("hi"))}; }

bool rect_valid(const Rect& r) { return r.lo.x < r.hi.x && r.lo.y < r.hi.y; }

std::vector<ActionEntry> make_actions(std::initializer_list<double> turn_degrees) {
  std::vector<ActionEntry> out{{"noop", 0.0, false}, {"forward", 0.0, true}};
  for (double d : turn_degrees) {
    out.push_back({"left" + std::to_string(static_cast<int>(d)), d * kDegree, true});
  }
  for (double d : turn_degrees) {
    out.push_back({"right" + std::to_string(static_cast<int>(d)), -d * kDegree, true});
  }
  return out;
}

// Earliest wall contact along p -> p + d.
std::optional<std::pair<double, const Segment*>> first_hit(const std::vector<Segment>& walls,
                                                           Vec2 p, Vec2 d) {
  std::optional<std::pair<double, const Segment*>> best;
  for (const Segment& s : walls) {
    if (auto t = geom::motion_hit(p, d, s)) {
      if (!best || *t < best->first) best = std::make_pair(*t, &s);
    }
  }
  return best;
}

// Point reached after walking fraction t of d, backed off from the contact.
Vec2 backed_off(Vec2 p, Vec2 d, double t) {
  const double len = d.norm();
  const double safe = len > 0.0 ? std::max(0.0, t - kBackoff / len) : 0.0;
  return p + d * safe;
}

}  // namespace

// ---------------------------------------------------------------------------
// WorldMap

void WorldMap::validate() const {
  if (!rect_valid(bounds) || !rect_valid(main_region) || !rect_valid(spawn_island) ||
      !rect_valid(spawn_box)) {
    throw ConfigError("map: every region must have lo < hi");
  }
  if (main_region.intersects(spawn_island)) {
    throw ConfigError("map: spawn island and main region must be disjoint");
  }
  if (!spawn_island.contains(spawn_box.lo) || !spawn_island.contains(spawn_box.hi)) {
    throw ConfigError("map: spawn box must lie on the spawn island");
  }
  for (const Polygon& poly : obstacles) {
    if (!poly.is_convex_ccw()) throw ConfigError("map: obstacles must be convex and counter-clockwise");
  }
  if (static_cast<int>(goal_anchors.size()) != kGoalCount) {
    throw ConfigError("map: exactly 16 goal anchors are required");
  }
  for (std::size_t i = 0; i < goal_anchors.size(); ++i) {
    const Vec2 g = goal_anchors[i];
    if (!main_region.contains(g) || !in_free_space(g)) {
      throw ConfigError("map: goal anchor " + std::to_string(i) + " is not in free main-region space");
    }
  }
  if (jump_links.empty()) throw ConfigError("map: at least one jump link is required");
  for (const JumpLink& link : jump_links) {
    if (!spawn_island.contains(link.from) || !in_free_space(link.from)) {
      throw ConfigError("map: jump link origin must be free space on the island");
    }
    if (!main_region.contains(link.to) || !in_free_space(link.to)) {
      throw ConfigError("map: jump link landing must be free space in the main region");
    }
    if (link.trigger_radius <= 0.0) throw ConfigError("map: jump trigger radius must be positive");
  }
  if (!(goal_radius > 0.0) || !(speed > 0.0) || max_steps <= 0) {
    throw ConfigError("map: goal_radius, speed and max_steps must be positive");
  }
  if (depth.rays <= 0 || !(depth.max_range > 0.0) || !(depth.fov > 0.0)) {
    throw ConfigError("map: depth sensor parameters must be positive");
  }
}

std::vector<Segment> WorldMap::walls() const {
  std::vector<Segment> out = main_region.edges();
  for (const Polygon& poly : obstacles) {
    auto e = poly.edges();
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

bool WorldMap::in_free_space(Vec2 p) const {
  if (!bounds.contains(p)) return false;
  return std::none_of(obstacles.begin(), obstacles.end(),
                      [&](const Polygon& poly) { return poly.contains_strict(p); });
}

std::uint64_t WorldMap::fingerprint() const { return hntt::fnv1a(map_to_json(*this).dump()); }

json map_to_json(const WorldMap& map) {
  json obstacles = json::array();
  for (const Polygon& poly : map.obstacles) {
    json verts = json::array();
    for (Vec2 v : poly.vertices) verts.push_back(point_json(v));
    obstacles.push_back(verts);
  }
  json links = json::array();
  for (const JumpLink& l : map.jump_links) {
    links.push_back({{"from", point_json(l.from)}, {"to", point_json(l.to)},
                     {"trigger_radius", l.trigger_radius}});
  }
  json goals = json::array();
  for (Vec2 g : map.goal_anchors) goals.push_back(point_json(g));
  return {
      {"schema", "hntt.map"},
      {"version", kMapSchemaVersion},
      {"name", map.name},
      {"bounds", rect_json(map.bounds)},
      {"main_region", rect_json(map.main_region)},
      {"spawn_island", rect_json(map.spawn_island)},
      {"spawn_box", rect_json(map.spawn_box)},
      {"obstacles", obstacles},
      {"jump_links", links},
      {"goal_anchors", goals},
      {"goal_radius", map.goal_radius},
      {"speed", map.speed},
      {"max_steps", map.max_steps},
      {"depth", {{"rays", map.depth.rays}, {"max_range", map.depth.max_range},
                 {"fov", map.depth.fov}}},
  };
}

WorldMap map_from_json(const json& j) {
  try {
    if (j.value("schema", "") != "hntt.map") throw ConfigError("map: schema must be \"hntt.map\"");
    if (j.at("version").get<int>() != kMapSchemaVersion) {
      throw ConfigError("map: unsupported version " + j.at("version").dump());
    }
    WorldMap m;
    m.name = j.value("name", "unnamed");
    m.bounds = rect_from(j.at("bounds"));
    m.main_region = rect_from(j.at("main_region"));
    m.spawn_island = rect_from(j.at("spawn_island"));
    m.spawn_box = rect_from(j.at("spawn_box"));
    for (const json& poly : j.at("obstacles")) {
      Polygon p;
      for (const json& v : poly) p.vertices.push_back(point_from(v));
      m.obstacles.push_back(std::move(p));
    }
    for (const json& l : j.at("jump_links")) {
      m.jump_links.push_back(
          {point_from(l.at("from")), point_from(l.at("to")), l.at("trigger_radius").get<double>()});
    }
    for (const json& g : j.at("goal_anchors")) m.goal_anchors.push_back(point_from(g));
    m.goal_radius = j.at("goal_radius").get<double>();
    m.speed = j.at("speed").get<double>();
    m.max_steps = j.at("max_steps").get<int>();
    if (j.contains("depth")) {
      const json& d = j.at("depth");
      m.depth.rays = d.at("rays").get<int>();
      m.depth.max_range = d.at("max_range").get<double>();
      m.depth.fov = d.at("fov").get<double>();
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("map: malformed document: ") + e.what());
  }
}

WorldMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("map file not found: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("map file " + path.string() + " is not valid JSON: " + e.what());
  }
  return map_from_json(j);
}

void save_map(const WorldMap& map, const std::filesystem::path& path) {
  io::write_atomic(path, map_to_json(map).dump(2) + "\n");
}

WorldMap default_map() {
  WorldMap m;
  m.name = "default";
  m.bounds = {{-500, -2000}, {8500, 9000}};
  m.main_region = {{0, 0}, {8000, 8500}};
  m.spawn_island = {{3000, -1000}, {5000, -600}};
  m.spawn_box = {{3700, -900}, {4300, -800}};

  auto rect = [](double x0, double y0, double x1, double y1) {
    return geom::make_rect_polygon({{x0, y0}, {x1, y1}});
  };
  m.obstacles = {
      rect(1200, 2000, 3200, 2400),
      rect(4800, 2000, 6800, 2400),
      rect(3700, 1200, 4300, 3600),
      Polygon{{{1500, 3400}, {2600, 3500}, {2000, 4200}}},
      Polygon{{{5400, 3500}, {6500, 3400}, {6000, 4200}}},
      Polygon{{{4000, 4500}, {4500, 5000}, {4000, 5500}, {3500, 5000}}},
      rect(1800, 5200, 2200, 6000),
      rect(5800, 6200, 6200, 7000),
      // Island rim: walls on three sides and along the ledge, leaving a
      // fall gap at the left corner and one opening per jump link.
      rect(2980, -1020, 3000, -580),
      rect(5000, -1020, 5020, -580),
      rect(2980, -1020, 5020, -1000),
      rect(3700, -600, 4300, -580),
      rect(4800, -600, 5020, -580),
  };
  m.jump_links = {
      {{3450, -600}, {2000, 700}, 250.0},
      {{4550, -600}, {6000, 700}, 250.0},
  };
  for (double y : {5600.0, 6300.0, 7000.0, 7700.0}) {
    for (double x : {1000.0, 3000.0, 5000.0, 7000.0}) m.goal_anchors.push_back({x, y});
  }
  m.goal_radius = 150.0;
  m.speed = 110.0;
  m.max_steps = 300;
  m.depth = {32, 2000.0, std::numbers::pi};
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Actions

const std::vector<ActionEntry>& action_space(ActionVariant variant) {
  static const std::vector<ActionEntry> baseline = make_actions({30, 45, 90});
  static const std::vector<ActionEntry> shaped = make_actions({18, 36, 45, 54, 72, 90});
  return variant == ActionVariant::kBaseline8 ? baseline : shaped;
}

std::string to_string(ActionVariant v) {
  return v == ActionVariant::kBaseline8 ? "baseline8" : "shaped14";
}

ActionVariant action_variant_from_string(const std::string& s) {
  if (s == "baseline8") return ActionVariant::kBaseline8;
  if (s == "shaped14") return ActionVariant::kShaped14;
  throw ConfigError("unknown action variant: " + s);
}

// ---------------------------------------------------------------------------
// Kinematics

std::vector<double> cast_depth(const std::vector<Segment>& walls, Vec2 origin, double heading,
                               const DepthSensor& sensor) {
  std::vector<double> out(static_cast<std::size_t>(sensor.rays));
  for (int i = 0; i < sensor.rays; ++i) {
    const double frac = sensor.rays == 1 ? 0.5 : static_cast<double>(i) / (sensor.rays - 1);
    const double angle = heading - sensor.fov / 2.0 + sensor.fov * frac;
    const Vec2 dir{std::cos(angle), std::sin(angle)};
    double best = sensor.max_range;
    for (const Segment& s : walls) {
      if (auto t = geom::ray_hit(origin, dir, s); t && *t < best) best = *t;
    }
    out[static_cast<std::size_t>(i)] = std::max(best, 1e-9);
  }
  return out;
}

MoveResult move_with_walls(const std::vector<Segment>& walls, Vec2 from, Vec2 delta) {
  auto hit = first_hit(walls, from, delta);
  if (!hit) return {from + delta, from + delta, false};

  const Vec2 contact = backed_off(from, delta, hit->first);
  const Vec2 remaining = delta * (1.0 - hit->first);
  const Segment& wall = *hit->second;
  const Vec2 tangent_raw = wall.b - wall.a;
  const Vec2 tangent = tangent_raw * (1.0 / tangent_raw.norm());
  const Vec2 slide = tangent * geom::dot(remaining, tangent);

  auto hit2 = first_hit(walls, contact, slide);
  const Vec2 end = hit2 ? backed_off(contact, slide, hit2->first) : contact + slide;
  return {end, contact, true};
}

NavEnv::NavEnv(std::shared_ptr<const WorldMap> map, ActionVariant variant)
    : map_(std::move(map)), variant_(variant), actions_(&action_space(variant)) {
  if (!map_) throw ConfigError("NavEnv requires a map");
  walls_ = map_->walls();
}

Observation NavEnv::reset(std::uint64_t seed, std::optional<int> goal_index) {
  if (goal_index && (*goal_index < 0 || *goal_index >= kGoalCount)) {
    throw RangeError("goal_index " + std::to_string(*goal_index) + " outside [0, 16)");
  }
  Rng rng(derive_seed(seed, 0));
  const int drawn_goal = static_cast<int>(uniform_index(rng, kGoalCount));
  goal_index_ = goal_index.value_or(drawn_goal);

  const Rect& box = map_->spawn_box;
  state_ = AgentState{};
  state_.position = {box.lo.x + (box.hi.x - box.lo.x) * uniform01(rng),
                     box.lo.y + (box.hi.y - box.lo.y) * uniform01(rng)};
  state_.heading = geom::wrap_angle(-std::numbers::pi + 2.0 * std::numbers::pi * uniform01(rng));
  state_.speed = map_->speed;
  state_.alive = true;
  state_.steps_elapsed = 0;
  initial_goal_distance_ = geom::distance(state_.position, goal());
  last_displacement_ = 0.0;
  done_ = false;
  started_ = true;
  return observe();
}

StepResult NavEnv::step(int action_index) {
  if (!started_ || done_) throw ProtocolError("step called on a finished or unstarted episode");
  if (action_index < 0 || action_index >= action_count()) {
    throw RangeError("action_index " + std::to_string(action_index) + " outside [0, " +
                     std::to_string(action_count()) + ")");
  }
  const ActionEntry& action = (*actions_)[static_cast<std::size_t>(action_index)];
  const Vec2 start = state_.position;
  const Vec2 goal_pt = goal();

  StepInfo info;
  info.initial_goal_distance = initial_goal_distance_;
  info.prev_goal_distance = geom::distance(start, goal_pt);
  info.heading_delta = action.heading_delta;
  info.abs_heading_delta = std::abs(action.heading_delta);
  state_.heading = geom::wrap_angle(state_.heading + action.heading_delta);

  Vec2 end = start;
  if (action.move) {
    const Vec2 delta{state_.speed * std::cos(state_.heading), state_.speed * std::sin(state_.heading)};
    const MoveResult mv = move_with_walls(walls_, start, delta);
    end = mv.end;
    info.collided_wall = mv.collided;
    info.displacement = geom::distance(start, end);

    if (map_->on_island(start)) {
      const Segment legs[2] = {{start, mv.contact}, {mv.contact, mv.end}};
      for (const JumpLink& link : map_->jump_links) {
        const bool triggered = std::any_of(std::begin(legs), std::end(legs), [&](const Segment& s) {
          return geom::point_segment_distance(link.from, s) <= link.trigger_radius;
        });
        if (triggered) {
          end = link.to;
          info.jumped = true;
          break;
        }
      }
      if (!info.jumped && !map_->on_island(end)) info.died = true;
    }
    if (!map_->bounds.contains(end)) info.died = true;
  }

  state_.position = end;
  info.recent_travel = last_displacement_ + info.displacement;
  last_displacement_ = info.displacement;
  ++state_.steps_elapsed;
  info.new_goal_distance = geom::distance(end, goal_pt);
  info.reached_goal = !info.died && info.new_goal_distance <= map_->goal_radius;
  if (info.died) state_.alive = false;
  info.truncated = !info.died && !info.reached_goal && state_.steps_elapsed >= map_->max_steps;
  done_ = info.died || info.reached_goal || info.truncated;
  return {observe(), info, done_};
}

Observation NavEnv::observe() const {
  Observation obs;
  obs.symbolic.assign(kSymbolicSize, 0.0);
  const Vec2 p = state_.position;
  const Vec2 to_goal = geom::to_local(goal() - p, state_.heading);
  obs.symbolic[kGoalDx] = to_goal.x;
  obs.symbolic[kGoalDy] = to_goal.y;
  obs.symbolic[kGoalDistance] = geom::distance(p, goal());
  obs.symbolic[kHeading] = state_.heading;
  obs.symbolic[kLastDisplacement] = last_displacement_;
  const bool island = map_->on_island(p);
  obs.symbolic[kOnIsland] = island ? 1.0 : 0.0;
  if (island) {
    const JumpLink* nearest = &map_->jump_links.front();
    for (const JumpLink& l : map_->jump_links) {
      if (geom::distance(p, l.from) < geom::distance(p, nearest->from)) nearest = &l;
    }
    const Vec2 to_jump = geom::to_local(nearest->from - p, state_.heading);
    obs.symbolic[kJumpDx] = to_jump.x;
    obs.symbolic[kJumpDy] = to_jump.y;
  }
  obs.symbolic[kPosX] = p.x;
  obs.symbolic[kPosY] = p.y;
  obs.depth = cast_depth(walls_, p, state_.heading, map_->depth);
  return obs;
}

// ---------------------------------------------------------------------------
// Shortest paths

namespace {

std::vector<Vec2> visibility_nodes(const WorldMap& map, double clearance) {
  std::vector<Vec2> nodes;
  for (const Polygon& poly : map.obstacles) {
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 prev = v[(i + n - 1) % n], cur = v[i], next = v[(i + 1) % n];
      // Outward normals of a CCW polygon point to the right of each edge.
      auto outward = [](Vec2 a, Vec2 b) {
        const Vec2 e = b - a;
        const double len = e.norm();
        return Vec2{e.y / len, -e.x / len};
      };
      const Vec2 n1 = outward(prev, cur), n2 = outward(cur, next);
      Vec2 bis = n1 + n2;
      const double blen = bis.norm();
      if (blen < 1e-12) continue;
      bis = bis * (1.0 / blen);
      const double c = geom::dot(bis, n1);
      const Vec2 node = cur + bis * (clearance / std::max(c, 0.05));
      if (map.main_region.contains(node) && map.in_free_space(node)) nodes.push_back(node);
    }
  }
  return nodes;
}

bool visible(const std::vector<Segment>& walls, const WorldMap& map, Vec2 a, Vec2 b) {
  for (const Segment& s : walls) {
    if (geom::segments_cross(a, b, s)) return false;
  }
  return map.in_free_space((a + b) * 0.5);
}

}  // namespace

double path_length(const std::vector<Vec2>& path) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) total += geom::distance(path[i - 1], path[i]);
  return total;
}

std::vector<Vec2> shortest_path(const WorldMap& map, Vec2 from, Vec2 to, double clearance) {
  const auto walls = map.walls();
  std::vector<Vec2> nodes{from, to};
  auto extra = visibility_nodes(map, clearance);
  nodes.insert(nodes.end(), extra.begin(), extra.end());
  const std::size_t n = nodes.size();

  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> parent(n, n);
  std::vector<bool> settled(n, false);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[0] = 0.0;
  pq.push({0.0, 0});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (settled[u]) continue;
    settled[u] = true;
    if (u == 1) break;
    for (std::size_t v = 0; v < n; ++v) {
      if (settled[v] || v == u) continue;
      const double nd = d + geom::distance(nodes[u], nodes[v]);
      if (nd >= dist[v]) continue;
      if (!visible(walls, map, nodes[u], nodes[v])) continue;
      dist[v] = nd;
      parent[v] = u;
      pq.push({nd, v});
    }
  }
  if (!settled[1]) return {};
  std::vector<Vec2> path;
  for (std::size_t v = 1; v != n; v = parent[v]) {
    path.push_back(nodes[v]);
    if (v == 0) break;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

int shortest_path_steps(const WorldMap& map, int goal_index) {
  if (goal_index < 0 || goal_index >= static_cast<int>(map.goal_anchors.size())) {
    throw RangeError("goal_index " + std::to_string(goal_index) + " out of range");
  }
  const Vec2 goal = map.goal_anchors[static_cast<std::size_t>(goal_index)];
  double best = std::numeric_limits<double>::infinity();
  for (const JumpLink& link : map.jump_links) {
    const auto path = shortest_path(map, link.to, goal);
    if (!path.empty()) best = std::min(best, path_length(path));
  }
  if (!std::isfinite(best)) {
    throw ConfigError("map invalid: goal " + std::to_string(goal_index) +
                      " is unreachable from every jump-link landing");
  }
  return std::max(1, static_cast<int>(std::ceil(best / map.speed - 1e-9)));
}

}  // namespace hntt::navsim
