#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "genplan/errors.hpp"
#include "genplan/experiments.hpp"
#include "genplan/planner.hpp"
#include "test_support.hpp"

namespace genplan {
namespace {

struct Fixture {
  const FlowModel& model = testing::quick_flow();
  InputGrid igrid{6};
  MaskCache cache = build_cache(model, igrid, AtomicGrid{});
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

const VehicleState kStart{-0.5, 0.0, 2.5, 0.0, 0.0};

World random_world(std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::kWorld);
  return gen_random_world(RandomWorldConfig{}, {kStart.x, kStart.y}, rng);
}

TEST(PathCost, NegativeTerminalX) {
  EXPECT_NEAR(path_cost(reconstruct({2.0, 0.0, 0.0, 0.0}, 10)), -2.0, 1e-12);
  const PosePath a = reconstruct({3.0, 0.2, -0.4, 0.1}, 30);
  const PosePath b = transform_to_world(a, {0.0, 7.5, 0.0});
  EXPECT_NEAR(path_cost(a), path_cost(b), 1e-12);
  PosePath c = a;
  c.samples.back().heading += 1.0;
  c.samples.back().y -= 3.0;
  EXPECT_EQ(path_cost(c), path_cost(a));
}

TEST(PathCost, StraightIsBestAmongEqualLength) {
  const double alpha = 3.0;
  const double straight = path_cost(reconstruct({alpha, 0.0, 0.0, 0.0}, 32));
  for (double k1 = -1.0; k1 <= 1.0; k1 += 0.25) {
    for (double k2 = -1.0; k2 <= 1.0; k2 += 0.25) {
      for (double k3 = -1.0; k3 <= 1.0; k3 += 0.25) {
        if (k1 == 0.0 && k2 == 0.0 && k3 == 0.0) continue;
        EXPECT_GT(path_cost(reconstruct({alpha, k1, k2, k3}, 32)), straight);
      }
    }
  }
}

TEST(Fallback, MaximumDecelerationFormula) {
  EXPECT_EQ(fallback_params({0.0, 0.0, 0.0, 0.0, 0.0}).alpha, kMinPrimitiveAlpha);
  EXPECT_NEAR(fallback_params({0.0, 0.0, 2.5, 0.0, 0.0}).alpha, 1.25, 1e-15);
  VehicleLimits weak;
  weak.accel_max = 0.5;
  EXPECT_NEAR(fallback_params({0.0, 0.0, 2.5, 0.0, 0.0}, weak).alpha, 5.0 - 1.0, 1e-12);
  const PosePath p = fallback({1.0, 2.0, 2.5, std::numbers::pi / 2, 0.0});
  EXPECT_NEAR(p.back().x, 1.0, 1e-12);
  EXPECT_NEAR(p.back().y, 3.25, 1e-12);
}

TEST(Plan, EmptyWorldTakesTheCheapestSample) {
  const auto& f = fixture();
  Rng rng(51);
  const PlanResult r = plan(kStart, World(), f.model, f.cache, f.igrid, PlanConfig{}, rng);
  EXPECT_EQ(r.stats.rejected_cells, 0u);
  EXPECT_EQ(r.stats.rejects, 0u);
  EXPECT_EQ(r.stats.draws, 512u);
  EXPECT_EQ(r.stats.accepted, 512u);
  EXPECT_EQ(r.stats.rank, 1u);
  EXPECT_EQ(r.stats.checks, 1u);
  EXPECT_FALSE(r.stats.fallback);
  EXPECT_EQ(r.cost, *std::min_element(r.accepted_costs.begin(), r.accepted_costs.end()));
  EXPECT_NEAR(r.world_path.front().x, kStart.x, 1e-12);
}

TEST(Plan, LazyCheckAccountingAndSafety) {
  const auto& f = fixture();
  std::size_t fallbacks = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const World w = random_world(seed);
    Rng rng = make_rng(seed, Stream::kPlanner);
    PlanConfig cfg;
    cfg.record_samples = true;
    const PlanResult r = plan(kStart, w, f.model, f.cache, f.igrid, cfg, rng);
    if (r.stats.fallback) {
      ++fallbacks;
      EXPECT_EQ(r.stats.rank, 0u);
      EXPECT_EQ(r.stats.checks, r.stats.accepted);
      for (const auto& s : r.samples) {
        if (!s.masked) EXPECT_TRUE(path_collides(s.world_path, w));
      }
      continue;
    }
    EXPECT_EQ(r.stats.checks, r.stats.rank);
    EXPECT_FALSE(path_collides(r.world_path, w, cfg.ds));
    // Optimal among every accepted sample that passes the explicit check.
    std::size_t cheaper = 0;
    for (const auto& s : r.samples) {
      if (s.masked) continue;
      if (s.cost < r.cost) {
        ++cheaper;
        EXPECT_TRUE(path_collides(s.world_path, w, cfg.ds));
      }
    }
    EXPECT_EQ(cheaper + 1, r.stats.rank);
    EXPECT_EQ(r.stats.accepted + r.stats.rejects, r.stats.draws);
  }
  EXPECT_LT(fallbacks, 40u);
}

TEST(Plan, NoAcceptedDrawLiesInARejectedCell) {
  const auto& f = fixture();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const World w = random_world(seed);
    const BitArray rejected = rejected_cells(f.cache, decompose(w, kStart.pose(), f.cache.atomic_grid()));
    Rng rng(1000 + seed);
    const PlanResult r = plan(kStart, w, f.model, f.cache, f.igrid, PlanConfig{}, rng);
    // Replay the same prior stream and classify each draw independently.
    Rng replay(1000 + seed);
    std::vector<double> costs;
    std::size_t rejects = 0;
    for (std::size_t d = 0; d < r.stats.draws; ++d) {
      Vec4 z;
      for (auto& c : z) c = standard_normal(replay);
      if (rejected.test(f.igrid.cell_of(z))) {
        ++rejects;
        continue;
      }
      const PosePath wp = transform_to_world(reconstruct(to_primitive(f.model.forward(z).value), kReconstructSamples),
                                             kStart.pose());
      costs.push_back(path_cost(wp));
    }
    EXPECT_EQ(rejects, r.stats.rejects);
    EXPECT_EQ(costs, r.accepted_costs);
  }
}

TEST(Plan, DeterministicForSeed) {
  const auto& f = fixture();
  const World w = random_world(3);
  Rng a(77), b(77);
  const PlanResult x = plan(kStart, w, f.model, f.cache, f.igrid, PlanConfig{}, a);
  const PlanResult y = plan(kStart, w, f.model, f.cache, f.igrid, PlanConfig{}, b);
  EXPECT_EQ(x.theta, y.theta);
  EXPECT_EQ(x.accepted_costs, y.accepted_costs);
  EXPECT_EQ(x.stats.rank, y.stats.rank);
  EXPECT_EQ(x.stats.draws, y.stats.draws);
}

TEST(Plan, EnclosedVehicleFallsBack) {
  const auto& f = fixture();
  // Free disc of radius 0.03 m, below the clamped minimum primitive length.
  std::vector<Obstacle> ring;
  for (int i = 0; i < 80; ++i) {
    const double a = 2 * std::numbers::pi * i / 80;
    ring.push_back({0.18 * std::cos(a), 0.18 * std::sin(a), 0.15});
  }
  Rng rng(52);
  const PlanResult r = plan({0.0, 0.0, 2.5, 0.0, 0.0}, World(ring), f.model, f.cache, f.igrid, PlanConfig{}, rng);
  EXPECT_TRUE(r.stats.fallback);
  EXPECT_EQ(r.theta, fallback_params({0.0, 0.0, 2.5, 0.0, 0.0}));
}

TEST(Plan, ObstaclesBeyondTheRoiAreStillChecked) {
  const auto& f = fixture();
  // A wall 3 m ahead is outside the ROI, so only the explicit check sees it.
  std::vector<Obstacle> wall;
  for (double y = -4.0; y <= 4.0; y += 0.2) wall.push_back({3.0, y, 0.15});
  const World w(wall);
  Rng rng(53);
  const PlanResult r = plan({0.0, 0.0, 2.5, 0.0, 0.0}, w, f.model, f.cache, f.igrid, PlanConfig{}, rng);
  EXPECT_EQ(r.stats.atomic_maps, 0u);
  if (!r.stats.fallback) {
    EXPECT_GT(r.stats.rank, 1u);
    EXPECT_FALSE(path_collides(r.world_path, w));
    EXPECT_LT(r.world_path.back().x, 3.0);
  }
}

TEST(Plan, SaturationStopsAtDrawBudget) {
  const auto& f = fixture();
  // Obstacle filling the ROI rejects most of the prior.
  std::vector<Obstacle> blob;
  for (double x = 0.8; x <= 1.7; x += 0.1) {
    for (double y = -0.45; y <= 0.45; y += 0.1) blob.push_back({x, y, 0.15});
  }
  PlanConfig cfg;
  cfg.n_samples = 64;
  cfg.max_draw_factor = 2.0;
  Rng rng(54);
  const PlanResult r = plan({0.0, 0.0, 2.5, 0.0, 0.0}, World(blob), f.model, f.cache, f.igrid, cfg, rng);
  EXPECT_LE(r.stats.draws, 128u);
  EXPECT_TRUE(r.stats.accepted == 64u || r.stats.draws == 128u);
}

TEST(Plan, RefusesForeignCache) {
  const auto& f = fixture();
  const FlowModel other = testing::random_flow(3);
  Rng rng(55);
  EXPECT_THROW(plan(kStart, World(), other, f.cache, f.igrid, PlanConfig{}, rng), ConfigError);
  EXPECT_THROW(plan(kStart, World(), f.model, f.cache, InputGrid(5), PlanConfig{}, rng), ConfigError);
}

}  // namespace
}  // namespace genplan
