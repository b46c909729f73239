#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "bnnsafe/sim/geometry.hpp"

namespace bnnsafe::sim {

struct Pose {
  Vec2 position;
  double heading = 0.0;
};

// Constant-curvature piece: a line (curvature 0) or a circular arc
// (positive curvature turns left).
struct PathSegment {
  Pose start;
  double length = 0.0;
  double curvature = 0.0;

  Pose at(double s) const {
    const double h0 = start.heading;
    if (curvature == 0.0) return {start.position + unit(h0) * s, h0};
    const double r = 1.0 / curvature;
    const Vec2 c = start.position + Vec2{-std::sin(h0), std::cos(h0)} * r;
    const double th = h0 + curvature * s;
    return {c + Vec2{std::sin(th), -std::cos(th)} * r, th};
  }
  Pose end() const { return at(length); }

  // Local arc length of the closest point, optionally extending a line past
  // either end.
  double closest(Vec2 p, bool extend_back, bool extend_forward) const {
    const double h0 = start.heading;
    double s;
    if (curvature == 0.0) {
      s = dot(p - start.position, unit(h0));
    } else {
      const double r = 1.0 / curvature;
      const Vec2 c = start.position + Vec2{-std::sin(h0), std::cos(h0)} * r;
      const Vec2 d = p - c;
      if (d.x == 0.0 && d.y == 0.0) return 0.5 * length;
      const double phi = std::atan2(d.y, d.x);
      const double th = curvature > 0.0 ? phi + 0.5 * std::numbers::pi : phi - 0.5 * std::numbers::pi;
      const double mid = h0 + curvature * 0.5 * length;
      s = 0.5 * length + wrap_angle(th - mid) / curvature;
      extend_back = extend_forward = false;
    }
    if (!extend_back) s = std::max(s, 0.0);
    if (!extend_forward) s = std::min(s, length);
    return s;
  }
};

struct PathProjection {
  double s = 0.0;        // arc length along the whole path
  double lateral = 0.0;  // signed, positive to the left of the direction of travel
  double distance = 0.0;
};

// Chained segments with arc-length parameterization. Lines at either end are
// treated as extending indefinitely.
class Path {
 public:
  Path() = default;

  explicit Path(Pose start) : cursor_(start) {}

  Path& line(double length) { return append(length, 0.0); }
  Path& arc(double radius, double turn) {
    if (!(radius > 0.0)) throw std::invalid_argument("arc radius must be positive");
    return append(radius * std::abs(turn), turn > 0.0 ? 1.0 / radius : -1.0 / radius);
  }

  const std::vector<PathSegment>& segments() const { return segments_; }
  double length() const { return offsets_.empty() ? 0.0 : offsets_.back() + segments_.back().length; }

  Pose at(double s) const {
    if (segments_.empty()) throw std::logic_error("empty path");
    if (s <= 0.0) return segments_.front().at(segments_.front().curvature == 0.0 ? s : 0.0);
    for (std::size_t i = 0; i < segments_.size(); ++i)
      if (s <= offsets_[i] + segments_[i].length || i + 1 == segments_.size()) {
        const double local = s - offsets_[i];
        const auto& seg = segments_[i];
        if (local > seg.length && seg.curvature != 0.0) {
          const Pose e = seg.end();
          return {e.position + unit(e.heading) * (local - seg.length), e.heading};
        }
        return seg.at(local);
      }
    return segments_.back().end();
  }

  PathProjection project(Vec2 p) const {
    if (segments_.empty()) throw std::logic_error("empty path");
    PathProjection best;
    best.distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      const auto& seg = segments_[i];
      const double local = seg.closest(p, i == 0, i + 1 == segments_.size());
      const Pose q = seg.at(local);
      const Vec2 d = p - q.position;
      const double dist = norm(d);
      if (dist < best.distance) {
        best.distance = dist;
        best.s = offsets_[i] + local;
        best.lateral = cross(unit(q.heading), d);
      }
    }
    return best;
  }

  // Distance to the path only, without trigonometry per query.
  double distance(Vec2 p) const {
    if (segments_.empty()) throw std::logic_error("empty path");
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = segments_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& g = cache_[i];
      double d;
      if (g.line) {
        const Vec2 rel = p - g.a;
        double t = dot(rel, g.dir);
        if (i != 0) t = std::max(t, 0.0);
        if (i + 1 != n) t = std::min(t, g.length);
        d = norm(rel - g.dir * t);
      } else {
        const Vec2 rel = p - g.a;
        const double r = norm(rel);
        if (dot(rel, g.dir) >= r * g.cos_half)
          d = std::abs(r - g.radius);
        else
          d = std::min(norm(p - g.p0), norm(p - g.p1));
      }
      best = std::min(best, d);
    }
    return best;
  }

 private:
  // Line: a = start, dir = heading. Arc: a = center, dir = mid-arc direction
  // from the center, cos_half = cos(half the swept angle).
  struct SegmentCache {
    bool line = true;
    Vec2 a, dir, p0, p1;
    double length = 0.0, radius = 0.0, cos_half = 1.0;
  };

  Path& append(double length, double curvature) {
    if (!(length > 0.0)) throw std::invalid_argument("path segment length must be positive");
    offsets_.push_back(length_so_far_);
    segments_.push_back({cursor_, length, curvature});
    cursor_ = segments_.back().end();
    const auto& seg = segments_.back();
    SegmentCache g;
    g.length = length;
    g.p0 = seg.start.position;
    g.p1 = cursor_.position;
    if (curvature == 0.0) {
      g.a = seg.start.position;
      g.dir = unit(seg.start.heading);
    } else {
      g.line = false;
      g.radius = 1.0 / std::abs(curvature);
      g.a = seg.start.position + Vec2{-std::sin(seg.start.heading), std::cos(seg.start.heading)} * (1.0 / curvature);
      const Vec2 mid = seg.at(0.5 * length).position - g.a;
      g.dir = mid * (1.0 / norm(mid));
      g.cos_half = std::cos(std::min(0.5 * length * std::abs(curvature), std::numbers::pi));
    }
    cache_.push_back(g);
    length_so_far_ += length;
    return *this;
  }

  Pose cursor_;
  std::vector<PathSegment> segments_;
  std::vector<double> offsets_;
  std::vector<SegmentCache> cache_;
  double length_so_far_ = 0.0;
};

}  // namespace bnnsafe::sim
