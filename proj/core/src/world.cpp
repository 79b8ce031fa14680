#include "genplan/world.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "genplan/errors.hpp"

namespace genplan {

World::World(std::vector<Obstacle> obstacles) : obstacles_(std::move(obstacles)) {
  if (obstacles_.empty()) return;
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = max_x;
  double max_r = 0.0;
  min_x_ = std::numeric_limits<double>::infinity();
  min_y_ = min_x_;
  for (const auto& o : obstacles_) {
    if (!(o.r > 0.0) || !std::isfinite(o.cx) || !std::isfinite(o.cy) || !std::isfinite(o.r)) {
      throw ParameterError("obstacle radius must be positive and all fields finite");
    }
    min_x_ = std::min(min_x_, o.cx - o.r);
    min_y_ = std::min(min_y_, o.cy - o.r);
    max_x = std::max(max_x, o.cx + o.r);
    max_y = std::max(max_y, o.cy + o.r);
    max_r = std::max(max_r, o.r);
  }
  cell_ = std::max(2.0 * max_r, 0.05);
  // Keep the bucket table bounded for sparse, very wide maps.
  while ((max_x - min_x_) / cell_ * (max_y - min_y_) / cell_ > 4.0e6) cell_ *= 2.0;
  nx_ = static_cast<int>(std::floor((max_x - min_x_) / cell_)) + 1;
  ny_ = static_cast<int>(std::floor((max_y - min_y_) / cell_)) + 1;

  auto cell_range = [&](const Obstacle& o, int& x0, int& x1, int& y0, int& y1) {
    x0 = std::clamp(static_cast<int>(std::floor((o.cx - o.r - min_x_) / cell_)) - 1, 0, nx_ - 1);
    x1 = std::clamp(static_cast<int>(std::floor((o.cx + o.r - min_x_) / cell_)) + 1, 0, nx_ - 1);
    y0 = std::clamp(static_cast<int>(std::floor((o.cy - o.r - min_y_) / cell_)) - 1, 0, ny_ - 1);
    y1 = std::clamp(static_cast<int>(std::floor((o.cy + o.r - min_y_) / cell_)) + 1, 0, ny_ - 1);
  };

  std::vector<std::uint32_t> counts(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
  for (const auto& o : obstacles_) {
    int x0, x1, y0, y1;
    cell_range(o, x0, x1, y0, y1);
    for (int ix = x0; ix <= x1; ++ix)
      for (int iy = y0; iy <= y1; ++iy) ++counts[static_cast<std::size_t>(ix) * ny_ + iy + 1];
  }
  for (std::size_t i = 1; i < counts.size(); ++i) counts[i] += counts[i - 1];
  cell_start_ = counts;
  cell_items_.resize(counts.back());
  std::vector<std::uint32_t> fill(counts.begin(), counts.end() - 1);
  for (std::uint32_t id = 0; id < obstacles_.size(); ++id) {
    int x0, x1, y0, y1;
    cell_range(obstacles_[id], x0, x1, y0, y1);
    for (int ix = x0; ix <= x1; ++ix)
      for (int iy = y0; iy <= y1; ++iy) cell_items_[fill[static_cast<std::size_t>(ix) * ny_ + iy]++] = id;
  }
}

bool World::collides(double x, double y) const {
  if (obstacles_.empty()) return false;
  const double fx = (x - min_x_) / cell_;
  const double fy = (y - min_y_) / cell_;
  if (!(fx >= 0.0) || !(fy >= 0.0) || fx >= nx_ || fy >= ny_) return false;
  const std::size_t cell = static_cast<std::size_t>(fx) * ny_ + static_cast<std::size_t>(fy);
  for (std::uint32_t i = cell_start_[cell]; i < cell_start_[cell + 1]; ++i) {
    const Obstacle& o = obstacles_[cell_items_[i]];
    if (point_in_disc(x, y, o.cx, o.cy, o.r)) return true;
  }
  return false;
}

bool point_collides(double x, double y, const World& world) { return world.collides(x, y); }

bool path_collides(const PosePath& path, const World& world, double ds) {
  if (!(ds > 0.0)) throw ParameterError("collision check spacing must be positive");
  if (world.empty()) return false;
  return for_each_resampled_point(path, ds, [&](double x, double y) { return world.collides(x, y); });
}

bool segment_collides(Point2 a, Point2 b, const World& world, double ds) {
  if (world.empty()) return false;
  auto hit = [&](double x, double y) { return world.collides(x, y); };
  return for_each_segment_point(a.x, a.y, b.x, b.y, ds, hit) || hit(b.x, b.y);
}

void write_world_csv(std::ostream& out, const World& world, const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "cx,cy,r\n";
  char buf[128];
  for (const auto& o : world.obstacles()) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", o.cx, o.cy, o.r);
    out << buf;
  }
}

World read_world_csv(std::istream& in) {
  std::vector<Obstacle> obs;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "cx,cy,r") throw FormatError("world CSV: expected header 'cx,cy,r'");
      header_seen = true;
      continue;
    }
    double v[3];
    std::istringstream ss(line);
    std::string field;
    int col = 0;
    while (std::getline(ss, field, ',')) {
      if (col >= 3) throw FormatError("world CSV: too many columns on line " + std::to_string(line_no));
      try {
        std::size_t used = 0;
        v[col] = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw FormatError("world CSV: bad number on line " + std::to_string(line_no));
      }
      ++col;
    }
    if (col != 3) throw FormatError("world CSV: expected 3 columns on line " + std::to_string(line_no));
    obs.push_back({v[0], v[1], v[2]});
  }
  if (!header_seen) throw FormatError("world CSV: missing header");
  return World(std::move(obs));
}

}  // namespace genplan
