#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "genplan/errors.hpp"
#include "genplan/world.hpp"

namespace genplan {
namespace {

bool brute_force_collides(double x, double y, const std::vector<Obstacle>& obs) {
  for (const auto& o : obs) {
    if ((x - o.cx) * (x - o.cx) + (y - o.cy) * (y - o.cy) < o.r * o.r) return true;
  }
  return false;
}

std::vector<Obstacle> random_obstacles(std::mt19937_64& rng, int n, double r_lo = 0.05, double r_hi = 0.6) {
  std::uniform_real_distribution<double> x(-2.0, 8.0);
  std::uniform_real_distribution<double> y(-4.0, 4.0);
  std::uniform_real_distribution<double> r(r_lo, r_hi);
  std::vector<Obstacle> out;
  for (int i = 0; i < n; ++i) out.push_back({x(rng), y(rng), r(rng)});
  return out;
}

TEST(PointCollides, CentreBoundaryAndEmptyWorld) {
  const World w({{1.0, 2.0, 0.5}});
  EXPECT_TRUE(point_collides(1.0, 2.0, w));
  EXPECT_FALSE(point_collides(1.5, 2.0, w));
  EXPECT_FALSE(point_collides(1.0, 1.5, w));
  EXPECT_TRUE(point_collides(1.0, 1.5000001, w));
  const World empty;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 1000; ++i) EXPECT_FALSE(point_collides(u(rng), u(rng), empty));
}

TEST(PointCollides, BucketIndexMatchesBruteForce) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> qx(-3.0, 9.0);
  std::uniform_real_distribution<double> qy(-5.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto obs = random_obstacles(rng, 1 + trial * 7);
    const World w(obs);
    for (int i = 0; i < 5000; ++i) {
      const double x = qx(rng);
      const double y = qy(rng);
      ASSERT_EQ(w.collides(x, y), brute_force_collides(x, y, obs)) << x << "," << y;
    }
  }
}

TEST(PointCollides, MonotoneInRadius) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> q(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double x = q(rng);
    const double y = q(rng);
    bool prev = false;
    for (double r = 0.05; r <= 1.5; r += 0.05) {
      const bool now = point_collides(x, y, World({{0.0, 0.0, r}}));
      EXPECT_TRUE(!prev || now);
      prev = now;
    }
  }
}

TEST(World, RejectsBadObstacles) {
  EXPECT_THROW(World({{0.0, 0.0, 0.0}}), ParameterError);
  EXPECT_THROW(World({{0.0, 0.0, -1.0}}), ParameterError);
  EXPECT_THROW(World({{NAN, 0.0, 1.0}}), ParameterError);
}

PosePath line_path(double x0, double y0, double x1, double y1, int n) {
  PosePath p;
  for (int i = 0; i < n; ++i) {
    const double f = static_cast<double>(i) / (n - 1);
    p.samples.push_back({f, x0 + f * (x1 - x0), y0 + f * (y1 - y0), 0.0});
  }
  return p;
}

TEST(PathCollides, ThroughCentreAndFarAway) {
  const World w({{2.0, 0.0, 0.15}});
  // Two vertices straddling the obstacle: only the dense resampling sees it.
  EXPECT_TRUE(path_collides(line_path(0.0, 0.0, 4.0, 0.0, 2), w));
  EXPECT_FALSE(path_collides(line_path(0.0, 0.16 + 0.01, 4.0, 0.16 + 0.01, 2), w));
  EXPECT_FALSE(path_collides(line_path(0.0, 1.0, 4.0, 1.0, 3), w));
  EXPECT_THROW(path_collides(line_path(0.0, 0.0, 1.0, 0.0, 2), w, 0.0), ParameterError);
}

TEST(PathCollides, AgreesWithTenfoldFinerOracle) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int agree = 0;
  const int n = 1000;
  for (int trial = 0; trial < n; ++trial) {
    const World w(random_obstacles(rng, 30, 0.1, 0.3));
    const PosePath p = reconstruct({0.5 + 5.0 * u(rng), 4.0 * u(rng) - 2.0, 4.0 * u(rng) - 2.0,
                                    4.0 * u(rng) - 2.0},
                                   20);
    const PosePath moved = transform_to_world(p, {-2.0 + 8.0 * u(rng), -3.0 + 6.0 * u(rng), 6.28 * u(rng)});
    if (path_collides(moved, w, 0.01) == path_collides(moved, w, 0.001)) ++agree;
  }
  EXPECT_GE(agree, static_cast<int>(0.995 * n));
}

TEST(SegmentCollides, ReplayMatchesWholePath) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const World w(random_obstacles(rng, 40, 0.1, 0.3));
    const PosePath p = transform_to_world(
        reconstruct({0.5 + 5.0 * u(rng), 4.0 * u(rng) - 2.0, 4.0 * u(rng) - 2.0, 4.0 * u(rng) - 2.0}, 30),
        {-1.0 + 6.0 * u(rng), -2.0 + 4.0 * u(rng), 6.28 * u(rng)});
    bool replay = point_collides(p.front().x, p.front().y, w);
    for (std::size_t i = 0; i + 1 < p.size() && !replay; ++i) {
      replay = segment_collides({p.samples[i].x, p.samples[i].y}, {p.samples[i + 1].x, p.samples[i + 1].y}, w,
                                0.005);
    }
    EXPECT_EQ(replay, path_collides(p, w, 0.005));
  }
}

TEST(SegmentPoints, SpacingNeverExceedsDs) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double ax = u(rng), ay = u(rng), bx = u(rng), by = u(rng);
    double px = ax, py = ay;
    bool first = true;
    int count = 0;
    for_each_segment_point(ax, ay, bx, by, 0.01, [&](double x, double y) {
      if (!first) EXPECT_LE(std::hypot(x - px, y - py), 0.01 + 1e-12);
      first = false;
      px = x;
      py = y;
      ++count;
      return false;
    });
    EXPECT_LE(std::hypot(bx - px, by - py), 0.01 + 1e-12);
    EXPECT_EQ(count, std::max(1, static_cast<int>(std::ceil(std::hypot(bx - ax, by - ay) / 0.01))));
  }
}

TEST(WorldCsv, RoundTripAndErrors) {
  const World w({{1.0, -2.0, 0.15}, {0.123456789012345, 4.0, 0.3}});
  std::stringstream ss;
  write_world_csv(ss, w, "seed 3");
  EXPECT_EQ(ss.str().rfind("# seed 3\ncx,cy,r\n", 0), 0u);
  EXPECT_EQ(read_world_csv(ss).obstacles(), w.obstacles());
  std::istringstream bad("cx,cy,r\n1,2\n");
  EXPECT_THROW(read_world_csv(bad), FormatError);
  std::istringstream no_header("1,2,3\n");
  EXPECT_THROW(read_world_csv(no_header), FormatError);
}

}  // namespace
}  // namespace genplan
