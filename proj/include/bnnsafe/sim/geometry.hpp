#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace bnnsafe::sim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }
inline Vec2 unit(double heading) { return {std::cos(heading), std::sin(heading)}; }

// Wraps to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

// Oriented rectangle; `length` runs along `heading`.
struct Rect {
  Vec2 center;
  double heading = 0.0;
  double length = 0.0;
  double width = 0.0;

  std::array<Vec2, 4> corners() const {
    const Vec2 f = unit(heading) * (0.5 * length);
    const Vec2 l = Vec2{-std::sin(heading), std::cos(heading)} * (0.5 * width);
    return {center + f + l, center + f - l, center - f - l, center - f + l};
  }

  bool contains(Vec2 p) const {
    const Vec2 d = p - center;
    const Vec2 f = unit(heading);
    const Vec2 l{-f.y, f.x};
    return std::abs(dot(d, f)) <= 0.5 * length && std::abs(dot(d, l)) <= 0.5 * width;
  }
};

// Separating-axis test; touching rectangles count as overlapping.
inline bool overlaps(const Rect& a, const Rect& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::array<Vec2, 4> axes{unit(a.heading), Vec2{-std::sin(a.heading), std::cos(a.heading)}, unit(b.heading),
                                 Vec2{-std::sin(b.heading), std::cos(b.heading)}};
  for (const Vec2& axis : axes) {
    double amin = dot(ca[0], axis), amax = amin, bmin = dot(cb[0], axis), bmax = bmin;
    for (int i = 1; i < 4; ++i) {
      const double pa = dot(ca[i], axis), pb = dot(cb[i], axis);
      amin = std::min(amin, pa);
      amax = std::max(amax, pa);
      bmin = std::min(bmin, pb);
      bmax = std::max(bmax, pb);
    }
    if (amax < bmin || bmax < amin) return false;
  }
  return true;
}

}  // namespace bnnsafe::sim
