#include "hntt/geometry.hpp"

#include <algorithm>

namespace hntt::geom {

std::vector<Segment> Rect::edges() const {
  const Vec2 a = lo, b = {hi.x, lo.y}, c = hi, d = {lo.x, hi.y};
  return {{a, b}, {b, c}, {c, d}, {d, a}};
}

bool Polygon::is_convex_ccw() const {
  const std::size_t n = vertices.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = vertices[i], b = vertices[(i + 1) % n], c = vertices[(i + 2) % n];
    if (cross(b - a, c - b) <= 0.0) return false;
  }
  return true;
}

bool Polygon::contains_strict(Vec2 p) const {
  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = vertices[i], b = vertices[(i + 1) % n];
    if (cross(b - a, p - a) <= 0.0) return false;
  }
  return n >= 3;
}

std::vector<Segment> Polygon::edges() const {
  std::vector<Segment> out;
  out.reserve(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    out.push_back({vertices[i], vertices[(i + 1) % vertices.size()]});
  }
  return out;
}

Polygon make_rect_polygon(const Rect& r) {
  return {{r.lo, {r.hi.x, r.lo.y}, r.hi, {r.lo.x, r.hi.y}}};
}

std::optional<double> motion_hit(Vec2 p, Vec2 d, const Segment& s) {
  const Vec2 e = s.b - s.a;
  const double denom = cross(d, e);
  if (denom == 0.0) return std::nullopt;
  const Vec2 w = s.a - p;
  const double t = cross(w, e) / denom;
  const double u = cross(w, d) / denom;
  if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

std::optional<double> ray_hit(Vec2 origin, Vec2 dir, const Segment& s) {
  const Vec2 e = s.b - s.a;
  const double denom = cross(dir, e);
  if (denom == 0.0) return std::nullopt;
  const Vec2 w = s.a - origin;
  const double t = cross(w, e) / denom;
  const double u = cross(w, dir) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

double point_segment_distance(Vec2 p, const Segment& s) {
  const Vec2 e = s.b - s.a;
  const double len2 = dot(e, e);
  if (len2 == 0.0) return distance(p, s.a);
  const double t = std::clamp(dot(p - s.a, e) / len2, 0.0, 1.0);
  return distance(p, s.a + e * t);
}

bool segments_cross(Vec2 a, Vec2 b, const Segment& s) {
  const double d1 = cross(s.b - s.a, a - s.a);
  const double d2 = cross(s.b - s.a, b - s.a);
  const double d3 = cross(b - a, s.a - a);
  const double d4 = cross(b - a, s.b - a);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
         ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

}  // namespace hntt::geom
