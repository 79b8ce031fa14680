#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "genplan/arc_primitives.hpp"
#include "genplan/geometry.hpp"

namespace genplan {

inline constexpr double kDefaultCheckSpacing = 0.01;  // m

struct Obstacle {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.15;

  friend bool operator==(const Obstacle&, const Obstacle&) = default;
};

// Strict containment: a point at distance exactly r is free.
inline bool point_in_disc(double px, double py, double cx, double cy, double r) {
  const double dx = px - cx;
  const double dy = py - cy;
  return dx * dx + dy * dy < r * r;
}

// Circular-obstacle map with a uniform bucket index for fast point queries.
// Immutable after construction.
class World {
 public:
  World() = default;
  explicit World(std::vector<Obstacle> obstacles);

  const std::vector<Obstacle>& obstacles() const { return obstacles_; }
  bool empty() const { return obstacles_.empty(); }
  std::size_t size() const { return obstacles_.size(); }

  bool collides(double x, double y) const;

 private:
  std::vector<Obstacle> obstacles_;
  double min_x_ = 0.0;
  double min_y_ = 0.0;
  double cell_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<std::uint32_t> cell_start_;
  std::vector<std::uint32_t> cell_items_;
};

bool point_collides(double x, double y, const World& world);

// Visits the dense resampling of a polyline used by every collision check:
// each segment [a, b] contributes a + (b - a) * k / m for k = 0..m-1 with
// m = max(1, ceil(|b - a| / ds)), followed by the final vertex. `fn(x, y)`
// returns true to stop early; the function returns whether it stopped.
template <class Fn>
bool for_each_segment_point(double ax, double ay, double bx, double by, double ds, Fn&& fn) {
  const double len = std::hypot(bx - ax, by - ay);
  const long m = std::max(1L, static_cast<long>(std::ceil(len / ds)));
  const double inv_m = 1.0 / static_cast<double>(m);
  for (long k = 0; k < m; ++k) {
    const double f = static_cast<double>(k) * inv_m;
    if (fn(ax + f * (bx - ax), ay + f * (by - ay))) return true;
  }
  return false;
}

template <class Fn>
bool for_each_resampled_point(const PosePath& path, double ds, Fn&& fn) {
  const auto& s = path.samples;
  if (s.empty()) return false;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (for_each_segment_point(s[i].x, s[i].y, s[i + 1].x, s[i + 1].y, ds, fn)) return true;
  }
  return fn(s.back().x, s.back().y);
}

// Dense check of a path against the world at spacing <= ds.
bool path_collides(const PosePath& path, const World& world, double ds = kDefaultCheckSpacing);

// Checks one executed segment the same way path_collides visits it,
// including the end point. Replaying a trajectory segment by segment gives
// the same answer as path_collides on the whole trajectory.
bool segment_collides(Point2 a, Point2 b, const World& world, double ds);

// World files: optional '#' comments, header "cx,cy,r", one obstacle per row.
void write_world_csv(std::ostream& out, const World& world, const std::string& comment = {});
World read_world_csv(std::istream& in);

}  // namespace genplan
