#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

namespace hntt::geom {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;
  double norm() const { return std::hypot(x, y); }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a + std::numbers::pi, two_pi);
  if (r < 0.0) r += two_pi;
  r -= std::numbers::pi;
  // fmod can round up to exactly pi for inputs just below an odd multiple.
  if (r >= std::numbers::pi) r -= two_pi;
  return r;
}

// Rotates `v` into the frame whose +x axis points along `heading`.
inline Vec2 to_local(Vec2 v, double heading) {
  const double c = std::cos(heading), s = std::sin(heading);
  return {c * v.x + s * v.y, -s * v.x + c * v.y};
}

struct Segment {
  Vec2 a;
  Vec2 b;
};

struct Rect {
  Vec2 lo;
  Vec2 hi;

  bool contains(Vec2 p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
  }
  bool intersects(const Rect& o) const {
    return !(o.lo.x > hi.x || o.hi.x < lo.x || o.lo.y > hi.y || o.hi.y < lo.y);
  }
  std::vector<Segment> edges() const;
};

// Convex polygon, vertices in counter-clockwise order.
struct Polygon {
  std::vector<Vec2> vertices;

  bool is_convex_ccw() const;
  // Strict interior test; points on the boundary are outside.
  bool contains_strict(Vec2 p) const;
  std::vector<Segment> edges() const;
};

Polygon make_rect_polygon(const Rect& r);

// Parameter t in [0, 1] along p->p+d at which the motion meets segment s,
// or nullopt when they do not touch. Parallel overlaps are ignored.
std::optional<double> motion_hit(Vec2 p, Vec2 d, const Segment& s);

// Distance along the ray origin + t*dir (|dir| = 1) to segment s.
std::optional<double> ray_hit(Vec2 origin, Vec2 dir, const Segment& s);

double point_segment_distance(Vec2 p, const Segment& s);

// True when the open segment a-b crosses s (touching endpoints excluded).
bool segments_cross(Vec2 a, Vec2 b, const Segment& s);

}  // namespace hntt::geom
