#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "genplan/errors.hpp"
#include "genplan/mask_cache.hpp"
#include "test_support.hpp"

namespace genplan {
namespace {

using testing::normal_quantile_bisect;

TEST(InputGrid, EdgesMatchQuantileOracle) {
  for (int K : {2, 3, 4, 6, 12, 40}) {
    const InputGrid g(K);
    ASSERT_EQ(g.edges().size(), static_cast<std::size_t>(K + 1));
    EXPECT_TRUE(std::isinf(g.edges().front()) && g.edges().front() < 0);
    EXPECT_TRUE(std::isinf(g.edges().back()) && g.edges().back() > 0);
    for (int j = 1; j < K; ++j) {
      EXPECT_NEAR(g.edges()[j], normal_quantile_bisect(static_cast<double>(j) / K), 1e-12);
      EXPECT_GT(g.edges()[j], g.edges()[j - 1]);
    }
    for (int j = 0; j < K; ++j) EXPECT_NEAR(g.bin_centroid(j), normal_quantile_bisect((j + 0.5) / K), 1e-12);
    EXPECT_EQ(g.n_cells(), static_cast<std::size_t>(K) * K * K * K);
  }
  EXPECT_NEAR(normal_quantile_bisect(0.25), -0.6744897501960817, 1e-12);
  EXPECT_NEAR(InputGrid(4).edges()[1], -0.6744897501960817, 1e-12);
}

TEST(InputGrid, OriginLandsRightOfMedian) {
  for (int K : {2, 4, 12}) {
    const InputGrid g(K);
    const auto b = g.unflatten(g.cell_of({0.0, 0.0, 0.0, 0.0}));
    for (int d : b) EXPECT_EQ(d, K / 2);
  }
}

TEST(InputGrid, CentroidsOfK2AndSymmetry) {
  const InputGrid g2(2);
  EXPECT_NEAR(g2.bin_centroid(0), -0.6744897501960817, 1e-12);
  EXPECT_NEAR(g2.bin_centroid(1), 0.6744897501960817, 1e-12);
  for (int K : {3, 6, 7}) {
    const InputGrid g(K);
    for (std::uint32_t c = 0; c < g.n_cells(); ++c) {
      EXPECT_EQ(g.cell_of(g.centroid(c)), c);
      auto b = g.unflatten(c);
      for (int& v : b) v = K - 1 - v;
      const Vec4 a = g.centroid(c);
      const Vec4 m = g.centroid(g.flatten(b));
      for (int i = 0; i < 4; ++i) EXPECT_EQ(a[i], -m[i]);
    }
  }
}

TEST(InputGrid, FlattenIsRowMajor) {
  const InputGrid g(5);
  EXPECT_EQ(g.flatten({1, 2, 3, 4}), static_cast<std::uint32_t>(((1 * 5 + 2) * 5 + 3) * 5 + 4));
  for (std::uint32_t c = 0; c < g.n_cells(); c += 7) EXPECT_EQ(g.flatten(g.unflatten(c)), c);
  EXPECT_THROW(InputGrid(0), ParameterError);
}

TEST(InputGrid, PriorOccupancyIsUniform) {
  const InputGrid g(6);
  Rng rng(41);
  const std::size_t n = 400000;
  std::vector<std::size_t> counts(g.n_cells(), 0);
  for (std::size_t k = 0; k < n; ++k) {
    ++counts[g.cell_of({standard_normal(rng), standard_normal(rng), standard_normal(rng), standard_normal(rng)})];
  }
  const double p = 1.0 / static_cast<double>(g.n_cells());
  const double se = std::sqrt(static_cast<double>(n) * p * (1 - p));
  double chi2 = 0.0;
  for (std::size_t c : counts) {
    EXPECT_LT(std::abs(static_cast<double>(c) - n * p), 5.0 * se);
    chi2 += (static_cast<double>(c) - n * p) * (static_cast<double>(c) - n * p) / (n * p);
  }
  // 1295 degrees of freedom: mean 1295, sd about 51.
  EXPECT_LT(std::abs(chi2 - 1295.0), 5.0 * 51.0);
}

TEST(AtomicGrid, IndexPositionMapping) {
  const AtomicGrid a;
  EXPECT_EQ(a.size(), 1600u);
  EXPECT_NEAR(a.spacing_x(), 0.025, 1e-15);
  const Point2 p0 = a.point(0);
  EXPECT_NEAR(p0.x, 0.7625, 1e-12);
  EXPECT_NEAR(p0.y, -0.4875, 1e-12);
  const Point2 p = a.point(a.index(39, 0));
  EXPECT_NEAR(p.x, 1.7375, 1e-12);
  EXPECT_NEAR(p.y, -0.4875, 1e-12);
  EXPECT_EQ(a.index(3, 7), 3u * 40 + 7);
}

TEST(BitArray, SetTestPopcountOr) {
  BitArray a(130), b(130);
  a.set(0);
  a.set(64);
  b.set(64);
  b.set(129);
  EXPECT_TRUE(a.test(64));
  EXPECT_FALSE(a.test(129));
  EXPECT_EQ(a.popcount(), 2u);
  a.or_with(b.words());
  EXPECT_EQ(a.popcount(), 3u);
  EXPECT_TRUE(a.test(129));
}

TEST(Decompose, ObstacleOnGridPointSelectsItAndNeighbours) {
  const AtomicGrid a;
  const Point2 g = a.point(a.index(20, 20));
  const auto sel = decompose(World({{g.x, g.y, a.r_atom}}), Pose2{}, a);
  EXPECT_TRUE(std::binary_search(sel.begin(), sel.end(), a.index(20, 20)));
  EXPECT_LE(sel.size(), 9u);
  EXPECT_GE(sel.size(), 5u);
}

TEST(Decompose, FarObstacleSelectsNothing) {
  const AtomicGrid a;
  const double rc = covering_radius(a, a.r_atom);
  EXPECT_TRUE(decompose(World({{a.x_max + a.r_atom + rc + 0.01, 0.0, a.r_atom}}), Pose2{}, a).empty());
  EXPECT_TRUE(decompose(World({{1.2, a.y_min - a.r_atom - 1e-6, a.r_atom}}), Pose2{}, a).empty());
  EXPECT_TRUE(decompose(World(), Pose2{}, a).empty());
}

TEST(Decompose, UsesVehicleFrame) {
  const AtomicGrid a;
  const Pose2 vehicle{5.0, -2.0, std::numbers::pi / 2};
  // 1.2 m ahead of a vehicle facing +y.
  const auto sel = decompose(World({{5.0, -0.8, 0.15}}), vehicle, a);
  const auto ref = decompose(World({{1.2, 0.0, 0.15}}), Pose2{}, a);
  EXPECT_EQ(sel, ref);
  EXPECT_FALSE(sel.empty());
}

// Every point of the true disc inside the ROI must lie inside some
// selected atomic disc.
void check_cover(const AtomicGrid& a, double r_obs, std::uint64_t seed, int n_obstacles, int n_points) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(a.x_min - r_obs, a.x_max + r_obs);
  std::uniform_real_distribution<double> uy(a.y_min - r_obs, a.y_max + r_obs);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int tested = 0;
  for (int k = 0; k < n_obstacles; ++k) {
    const Obstacle o{ux(rng), uy(rng), r_obs};
    const auto sel = decompose(World({o}), Pose2{}, a);
    for (int i = 0; i < n_points; ++i) {
      const double rr = r_obs * std::sqrt(u01(rng));
      const double th = 2 * std::numbers::pi * u01(rng);
      const double px = o.cx + rr * std::cos(th);
      const double py = o.cy + rr * std::sin(th);
      if (px < a.x_min || px > a.x_max || py < a.y_min || py > a.y_max) continue;
      ++tested;
      bool covered = false;
      for (auto s : sel) {
        const Point2 g = a.point(s);
        if (std::hypot(px - g.x, py - g.y) < a.r_atom) {
          covered = true;
          break;
        }
      }
      ASSERT_TRUE(covered) << "obstacle " << o.cx << "," << o.cy << " point " << px << "," << py;
    }
  }
  EXPECT_GT(tested, n_obstacles * n_points / 4);
}

TEST(DecomposeProperty, OverCoversEqualRadiusObstacles) { check_cover(AtomicGrid{}, 0.15, 42, 200, 10000); }

TEST(DecomposeProperty, OverCoversLargerAndSmallerObstacles) {
  check_cover(AtomicGrid{}, 0.3, 43, 100, 5000);
  check_cover(AtomicGrid{}, 0.05, 44, 100, 5000);
  AtomicGrid coarse;
  coarse.nx = 7;
  coarse.ny = 5;
  check_cover(coarse, 0.15, 45, 200, 5000);
  check_cover(coarse, 0.4, 46, 100, 5000);
}

TEST(Covering, RadiusRule) {
  const AtomicGrid a;
  const double h = 0.5 * std::hypot(0.025, 0.025);
  EXPECT_NEAR(covering_radius(a, 0.15), 2 * h, 1e-15);
  EXPECT_NEAR(covering_radius(a, 0.25), h + 0.1 + h, 1e-15);
  EXPECT_NEAR(covering_radius(a, 0.01), h, 1e-15);
}

FlowModel short_primitive_flow() {
  FlowModel m;
  Rng rng(47);
  m.init_weights(rng);
  m.set_whitening({0.3, 0.0, 0.0, 0.0}, {0.01, 0.1, 0.1, 0.1});
  return m;
}

TEST(BuildCache, PrimitivesThatNeverReachTheRoiGiveEmptyMasks) {
  const FlowModel m = short_primitive_flow();
  const MaskCache c = build_cache(m, InputGrid(4), AtomicGrid{});
  for (std::uint32_t a = 0; a < c.atomic_grid().size(); ++a) EXPECT_EQ(c.map_popcount(a), 0u);
  EXPECT_EQ(c.flow_checksum(), m.checksum());
}

TEST(BuildCache, ExactAtCentroidsFullSweepSmallK) {
  const FlowModel& m = testing::quick_flow();
  const InputGrid g(4);
  const AtomicGrid agrid;
  const MaskCache c = build_cache(m, g, agrid);
  std::mt19937_64 rng(48);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(agrid.size() - 1));
  std::size_t set_bits = 0;
  for (int k = 0; k < 60; ++k) {
    const std::uint32_t a = pick(rng);
    const Point2 p = agrid.point(a);
    const World w({{p.x, p.y, agrid.r_atom}});
    for (std::uint32_t cell = 0; cell < g.n_cells(); ++cell) {
      const PosePath path = reconstruct(to_primitive(m.forward(g.centroid(cell)).value), kReconstructSamples);
      const bool direct = path_collides(path, w, kDefaultCheckSpacing);
      ASSERT_EQ(c.bit(a, cell), direct) << "atomic " << a << " cell " << cell;
      set_bits += direct;
    }
  }
  EXPECT_GT(set_bits, 0u);
}

TEST(BuildCache, ExactAtCentroidsSpotChecks) {
  const FlowModel& m = testing::quick_flow();
  const InputGrid g(8);
  const AtomicGrid agrid;
  const MaskCache c = build_cache(m, g, agrid);
  std::mt19937_64 rng(49);
  std::uniform_int_distribution<std::uint32_t> pa(0, static_cast<std::uint32_t>(agrid.size() - 1));
  std::uniform_int_distribution<std::uint32_t> pc(0, static_cast<std::uint32_t>(g.n_cells() - 1));
  for (int k = 0; k < 1000; ++k) {
    const std::uint32_t a = pa(rng);
    const std::uint32_t cell = pc(rng);
    const Point2 p = agrid.point(a);
    const PosePath path = reconstruct(to_primitive(m.forward(g.centroid(cell)).value), kReconstructSamples);
    ASSERT_EQ(c.bit(a, cell), path_collides(path, World({{p.x, p.y, agrid.r_atom}}), kDefaultCheckSpacing));
  }
}

TEST(BuildCache, IndependentOfWorkerCount) {
  const FlowModel& m = testing::quick_flow();
  CacheBuildOptions one;
  one.workers = 1;
  CacheBuildOptions many;
  many.workers = 5;
  const auto a = serialize_cache(build_cache(m, InputGrid(6), AtomicGrid{}, one));
  const auto b = serialize_cache(build_cache(m, InputGrid(6), AtomicGrid{}, many));
  EXPECT_EQ(a, b);
}

TEST(RejectedCells, EmptySingleAndMonotone) {
  const MaskCache c = build_cache(testing::quick_flow(), InputGrid(6), AtomicGrid{});
  EXPECT_EQ(rejected_cells(c, {}).popcount(), 0u);
  const std::vector<std::uint32_t> one{c.atomic_grid().index(10, 20)};
  const BitArray single = rejected_cells(c, one);
  for (std::uint32_t cell = 0; cell < c.n_cells(); ++cell) EXPECT_EQ(single.test(cell), c.bit(one[0], cell));
  std::mt19937_64 rng(50);
  std::uniform_int_distribution<std::uint32_t> pick(0, 1599);
  for (int k = 0; k < 100; ++k) {
    const std::uint32_t x = pick(rng), y = pick(rng);
    const std::vector<std::uint32_t> both{x, y};
    EXPECT_GE(rejected_cells(c, both).popcount(), std::max(c.map_popcount(x), c.map_popcount(y)));
  }
  const std::vector<std::uint32_t> bad{1600};
  EXPECT_THROW(rejected_cells(c, bad), ParameterError);
}

TEST(CacheIo, RoundTripSizeAndValidation) {
  const FlowModel& m = testing::quick_flow();
  MaskCache c = build_cache(m, InputGrid(6), AtomicGrid{});
  Digest h{};
  h[5] = 9;
  c.set_config_hash(h);
  testing::TempDir dir("cacheio");
  const std::string path = dir.file("c.gpmc");
  save_cache(c, path);
  EXPECT_EQ(std::filesystem::file_size(path), 1600u * ((6u * 6 * 6 * 6 + 7) / 8) + kCacheHeaderBytes);
  EXPECT_EQ(std::filesystem::file_size(path), cache_file_size(c));
  const MaskCache back = load_cache(path);
  EXPECT_EQ(back, c);
  EXPECT_NO_THROW(back.require_model(m));
  EXPECT_THROW(back.require_model(testing::random_flow(1)), ConfigError);

  const auto bytes = serialize_cache(c);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "GPMC");
  EXPECT_THROW(deserialize_cache(std::span(bytes.data(), bytes.size() - 1)), FormatError);
  EXPECT_THROW(deserialize_cache(std::span(bytes.data(), 20)), FormatError);
  auto v = bytes;
  v[4] = 99;
  EXPECT_THROW(deserialize_cache(v), FormatError);
}

TEST(CacheIo, BitLayoutIsLsbFirstPerByte) {
  const MaskCache c = build_cache(testing::quick_flow(), InputGrid(6), AtomicGrid{});
  const auto bytes = serialize_cache(c);
  const std::size_t map_bytes = (c.n_cells() + 7) / 8;
  for (std::uint32_t a : {0u, 777u, 1599u}) {
    for (std::uint32_t cell = 0; cell < c.n_cells(); cell += 3) {
      const std::uint8_t byte = bytes[kCacheHeaderBytes + a * map_bytes + cell / 8];
      EXPECT_EQ(((byte >> (cell % 8)) & 1u) != 0, c.bit(a, cell));
    }
  }
}

TEST(ToPrimitive, ClampsIntoValidRange) {
  const PrimitiveParams p = to_primitive({-1.0, 9.0, -9.0, 0.5}, 4.0);
  EXPECT_EQ(p.alpha, kMinPrimitiveAlpha);
  EXPECT_EQ(p.kappa1, 4.0);
  EXPECT_EQ(p.kappa2, -4.0);
  EXPECT_EQ(p.kappa3, 0.5);
}

}  // namespace
}  // namespace genplan
